#pragma once

#include <string>

#include "holomc/measure.hpp"

namespace holomc {

/// 17-significant-digit round-trippable float formatting; all output files go
/// through this so reruns are byte-identical.
std::string format_double(double v);

std::string json_escape(const std::string& s);

/// Fixed key order, fixed formatting.
std::string measure_to_json(const HolonomyMeasure& mu);

HolonomyMeasure measure_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a over the raw bytes.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace holomc
