#include "cssr/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace cssr {

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}

void put_f64(std::ofstream& f, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    f.write(reinterpret_cast<char*>(b), 8);
}

struct Reader {
    std::ifstream f;
    std::string path;
    int64_t offset = 0;

    void read(void* dst, int64_t n, const char* what) {
        f.read(static_cast<char*>(dst), n);
        if (f.gcount() != n) {
            throw DataError(path + ": truncated reading " + what + " at byte offset " +
                            std::to_string(offset) + " (expected " + std::to_string(n) + " bytes, got " +
                            std::to_string(f.gcount()) + ")");
        }
        offset += n;
    }
    uint32_t u32(const char* what) {
        unsigned char b[4];
        read(b, 4, what);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    double f64(const char* what) {
        unsigned char b[8];
        read(b, 8, what);
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    bool at_eof() {
        f.peek();
        return f.eof();
    }
};

void write_record(std::ofstream& f, const std::string& name, const Tensor& t) {
    put_u32(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_u32(f, static_cast<uint32_t>(t.dim(i)));
    for (int64_t i = 0; i < t.size(); ++i) put_f64(f, t[i]);
}

std::vector<std::pair<std::string, Tensor>> stats_records(const ScoreStats& s) {
    std::vector<std::pair<std::string, Tensor>> recs;
    int m = s.num_classes, d = s.feature_dim;
    recs.push_back({"__stats/meta", Tensor({5}, {static_cast<double>(m), static_cast<double>(d),
                                                 static_cast<double>(s.gram_power),
                                                 s.calibrated ? 1.0 : 0.0, s.has_threshold ? 1.0 : 0.0})});
    Tensor mu({m, d}), mu_tilde({m, d}), gram({m, d, d}), empty({m});
    for (int c = 0; c < m; ++c) {
        auto cc = static_cast<size_t>(c);
        for (int j = 0; j < d; ++j) {
            mu[static_cast<int64_t>(c) * d + j] = s.mu[cc][j];
            mu_tilde[static_cast<int64_t>(c) * d + j] = s.mu_tilde[cc][j];
        }
        for (int64_t j = 0; j < static_cast<int64_t>(d) * d; ++j)
            gram[static_cast<int64_t>(c) * d * d + j] = s.gram[cc][j];
        empty[c] = s.empty_class[cc] ? 1.0 : 0.0;
    }
    recs.push_back({"__stats/mu", std::move(mu)});
    recs.push_back({"__stats/mu_tilde", std::move(mu_tilde)});
    recs.push_back({"__stats/gram", std::move(gram)});
    recs.push_back({"__stats/empty", std::move(empty)});
    recs.push_back({"__stats/score_mean", Tensor({3}, {s.score_mean[0], s.score_mean[1], s.score_mean[2]})});
    recs.push_back({"__stats/score_std", Tensor({3}, {s.score_std[0], s.score_std[1], s.score_std[2]})});
    recs.push_back({"__stats/weights", Tensor({3}, {s.weights[0], s.weights[1], s.weights[2]})});
    recs.push_back({"__stats/threshold", Tensor({1}, {s.threshold})});
    return recs;
}

ScoreStats stats_from_records(const std::vector<std::pair<std::string, Tensor>>& recs,
                              const std::string& path) {
    auto find = [&](const std::string& name) -> const Tensor& {
        for (const auto& [n, t] : recs) {
            if (n == name) return t;
        }
        throw DataError(path + ": checkpoint statistics missing record " + name);
    };
    const Tensor& meta = find("__stats/meta");
    ScoreStats s;
    s.num_classes = static_cast<int>(meta[0]);
    s.feature_dim = static_cast<int>(meta[1]);
    s.gram_power = static_cast<int>(meta[2]);
    s.calibrated = meta[3] != 0.0;
    s.has_threshold = meta[4] != 0.0;
    int m = s.num_classes, d = s.feature_dim;
    const Tensor& mu = find("__stats/mu");
    const Tensor& mu_tilde = find("__stats/mu_tilde");
    const Tensor& gram = find("__stats/gram");
    const Tensor& empty = find("__stats/empty");
    if (mu.shape() != std::vector<int>({m, d}) || gram.shape() != std::vector<int>({m, d, d}))
        throw DataError(path + ": checkpoint statistics have inconsistent shapes");
    for (int c = 0; c < m; ++c) {
        Tensor muc({d}), mtc({d}), gc({d, d});
        for (int j = 0; j < d; ++j) {
            muc[j] = mu[static_cast<int64_t>(c) * d + j];
            mtc[j] = mu_tilde[static_cast<int64_t>(c) * d + j];
        }
        for (int64_t j = 0; j < static_cast<int64_t>(d) * d; ++j)
            gc[j] = gram[static_cast<int64_t>(c) * d * d + j];
        s.mu.push_back(std::move(muc));
        s.mu_tilde.push_back(std::move(mtc));
        s.gram.push_back(std::move(gc));
        s.empty_class.push_back(empty[c] != 0.0 ? 1 : 0);
    }
    const Tensor& mean = find("__stats/score_mean");
    const Tensor& sd = find("__stats/score_std");
    const Tensor& w = find("__stats/weights");
    for (int i = 0; i < 3; ++i) {
        s.score_mean[static_cast<size_t>(i)] = mean[i];
        s.score_std[static_cast<size_t>(i)] = sd[i];
        s.weights[static_cast<size_t>(i)] = w[i];
    }
    s.threshold = find("__stats/threshold")[0];
    return s;
}

} // namespace

void write_checkpoint(const std::string& path, const std::string& config_json,
                      const std::vector<std::pair<std::string, Tensor>>& tensors,
                      const ScoreStats* stats) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint " + path);
    f.write(kCheckpointMagic, 5);
    char version = static_cast<char>(kCheckpointVersion);
    f.write(&version, 1);
    put_u32(f, static_cast<uint32_t>(config_json.size()));
    f.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
    std::vector<std::pair<std::string, Tensor>> all = tensors;
    if (stats) {
        auto recs = stats_records(*stats);
        all.insert(all.end(), recs.begin(), recs.end());
    }
    put_u32(f, static_cast<uint32_t>(all.size()));
    for (const auto& [name, t] : all) write_record(f, name, t);
    if (!f) throw DataError("write failed for checkpoint " + path);
}

CheckpointContents read_checkpoint(const std::string& path) {
    Reader r;
    r.f.open(path, std::ios::binary);
    if (!r.f) throw DataError("cannot open checkpoint " + path);
    r.path = path;
    char magic[5];
    r.read(magic, 5, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 5) != 0)
        throw DataError(path + ": bad checkpoint magic at byte offset 0");
    unsigned char version;
    r.read(&version, 1, "version");
    if (version != kCheckpointVersion)
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version) +
                        " at byte offset 5 (expected " + std::to_string(kCheckpointVersion) + ")");
    uint32_t config_len = r.u32("config length");
    CheckpointContents out;
    out.config_json.resize(config_len);
    if (config_len > 0) r.read(out.config_json.data(), config_len, "config json");

    uint32_t count = r.u32("record count");
    std::vector<std::pair<std::string, Tensor>> stats_recs;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32("record name length");
        std::string name(name_len, '\0');
        r.read(name.data(), name_len, "record name");
        uint32_t rank = r.u32("record rank");
        if (rank == 0 || rank > 8) throw DataError(path + ": record " + name + " has invalid rank");
        std::vector<int> shape;
        int64_t numel = 1;
        for (uint32_t j = 0; j < rank; ++j) {
            auto dim = static_cast<int>(r.u32("record dim"));
            shape.push_back(dim);
            numel *= dim;
        }
        Tensor t(shape);
        for (int64_t j = 0; j < numel; ++j) t[j] = r.f64("record values");
        if (name.rfind("__stats/", 0) == 0) {
            stats_recs.push_back({std::move(name), std::move(t)});
        } else {
            out.tensors.push_back({std::move(name), std::move(t)});
        }
    }
    if (!r.at_eof()) throw DataError(path + ": trailing bytes after last record at offset " +
                                     std::to_string(r.offset));
    if (!stats_recs.empty()) out.stats = stats_from_records(stats_recs, path);
    return out;
}

} // namespace cssr
