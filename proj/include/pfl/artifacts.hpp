#pragma once

#include <string>
#include <vector>

#include "pfl/federation.hpp"

namespace pfl {

// All writers are atomic: content goes to "<path>.tmp" and is renamed into
// place, so a crashed run never leaves a partial artifact.

void write_text_atomic(const std::string& path, const std::string& content);

// one JSON object per round: k, t_k, active ids, stationarity samples, drift stats
void write_rounds_jsonl(const std::string& path, const std::vector<RoundRecord>& rounds);

// dimension header (64-bit LE) followed by 64-bit LE doubles
void write_model_blob(const std::string& path, const Vec& w);
Vec read_model_blob(const std::string& path);

}  // namespace pfl
