#include "pfl/artifacts.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pfl/errors.hpp"

namespace pfl {

using nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void write_rounds_jsonl(const std::string& path, const std::vector<RoundRecord>& rounds) {
    std::string body;
    for (const RoundRecord& r : rounds) {
        json j;
        j["k"] = r.k;
        j["t_report"] = r.t_report;
        j["active"] = r.active;
        j["stationarity"] = r.stationarity;
        if (!r.drift.mean_norm.empty()) {
            j["drift_mean"] = r.drift.mean_norm;
            j["drift_mean_sq"] = r.drift.mean_sq_norm;
        }
        body += j.dump();
        body += '\n';
    }
    write_text_atomic(path, body);
}

namespace {
static_assert(std::endian::native == std::endian::little,
              "model blob writer assumes a little-endian host");
}

void write_model_blob(const std::string& path, const Vec& w) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        const std::uint64_t dim = w.size();
        out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        out.write(reinterpret_cast<const char*>(w.data()),
                  static_cast<std::streamsize>(w.size() * sizeof(double)));
    }
    std::filesystem::rename(tmp, path);
}

Vec read_model_blob(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::uint64_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in) throw DataError("model blob: truncated header in " + path);
    Vec w(dim);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) throw DataError("model blob: truncated payload in " + path);
    return w;
}

}  // namespace pfl
