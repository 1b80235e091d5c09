#include "holomc/jsonio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace holomc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string measure_to_json(const HolonomyMeasure& mu) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"kind\": \"" << (mu.kind == MeasureKind::Analytic ? "analytic" : "empirical")
     << "\",\n";
  os << "  \"group\": \"" << (mu.u1 ? "U1" : "O(r)") << "\",\n";
  os << "  \"rank\": " << mu.rank << ",\n";
  os << "  \"atoms\": [\n";
  for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
    const auto& a = mu.atoms[i];
    os << "    {";
    if (mu.u1) {
      os << "\"angle\": " << format_double(a.h.angle);
    } else {
      os << "\"matrix\": [";
      for (int r = 0; r < a.h.Q.rows(); ++r) {
        os << (r ? ", [" : "[");
        for (int c = 0; c < a.h.Q.cols(); ++c)
          os << (c ? ", " : "") << format_double(a.h.Q(r, c));
        os << "]";
      }
      os << "]";
    }
    os << ", \"weight\": " << format_double(a.weight) << "}"
       << (i + 1 < mu.atoms.size() ? "," : "") << "\n";
  }
  os << "  ],\n";
  os << "  \"meta\": {\"m\": " << mu.meta.m << ", \"samples\": " << mu.meta.samples
     << ", \"seed\": " << mu.meta.seed << ", \"deficit\": " << format_double(mu.meta.deficit)
     << "}\n";
  os << "}\n";
  return os.str();
}

HolonomyMeasure measure_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  HolonomyMeasure mu;
  mu.kind = (j.at("kind").get<std::string>() == "analytic") ? MeasureKind::Analytic
                                                            : MeasureKind::Empirical;
  mu.u1 = j.at("group").get<std::string>() == "U1";
  mu.rank = j.value("rank", 2);
  for (const auto& ja : j.at("atoms")) {
    MeasureAtom a;
    a.weight = ja.at("weight").get<double>();
    if (mu.u1) {
      const double ang = ja.at("angle").get<double>();
      a.h.has_u1 = true;
      a.h.angle = ang;
      const double t = 2.0 * 3.14159265358979323846 * ang;
      a.h.Q.resize(2, 2);
      a.h.Q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    } else {
      const auto& jm = ja.at("matrix");
      const int r = static_cast<int>(jm.size());
      a.h.Q.resize(r, r);
      for (int p = 0; p < r; ++p)
        for (int q = 0; q < r; ++q) a.h.Q(p, q) = jm[p][q].get<double>();
    }
    mu.atoms.push_back(a);
  }
  const auto& jm = j.at("meta");
  mu.meta.m = jm.value("m", 0);
  mu.meta.samples = jm.value("samples", 0LL);
  mu.meta.seed = jm.value("seed", 0ULL);
  mu.meta.deficit = jm.value("deficit", 0.0);
  return mu;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace holomc
