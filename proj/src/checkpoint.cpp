#include "bec4wm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "bec4wm/errors.hpp"

namespace bec4wm {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

constexpr std::uint64_t kMagic = 0x31304d4d53434542ull;  // "BECSMM01"

class Writer {
public:
    void u64(std::uint64_t v) {
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
        char b[8];
        std::memcpy(b, &v, 8);
        out_.append(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void complexes(const std::vector<cplx>& v) {
        u64(v.size());
        for (const cplx& x : v) {
            f64(x.real());
            f64(x.imag());
        }
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}
    std::uint64_t u64() {
        if (pos_ + 8 > in_.size()) throw ConfigError("checkpoint payload truncated");
        std::uint64_t v;
        std::memcpy(&v, in_.data() + pos_, 8);
        pos_ += 8;
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t count() {
        const std::uint64_t n = u64();
        if (n > (in_.size() - pos_) / 8) throw ConfigError("checkpoint payload corrupt");
        return static_cast<std::size_t>(n);
    }
    std::vector<double> doubles() {
        std::vector<double> v(count());
        for (double& x : v) x = f64();
        return v;
    }
    std::vector<cplx> complexes() {
        std::vector<cplx> v(count());
        for (cplx& x : v) {
            const double re = f64();
            x = cplx(re, f64());
        }
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    std::string_view in_;
    std::size_t pos_ = 0;
};

void write_file(const fs::path& path, std::string_view bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string serialize_moments(const EnsembleMoments& m) {
    Writer w;
    w.u64(kMagic);
    for (int a = 0; a < 3; ++a) w.u64(static_cast<std::uint64_t>(m.points[a]));
    for (int a = 0; a < 3; ++a) w.f64(m.lengths[a]);
    w.f64(m.spec.k_r);
    w.f64(m.spec.shell);
    w.f64(m.spec.axial_mask);
    w.f64(m.spec.exclusion);
    for (int a = 0; a < 3; ++a) w.u64(static_cast<std::uint64_t>(m.spec.max_lag[a]));
    w.u64(m.spec.track_mean_field ? 1 : 0);
    w.u64(m.n_valid);
    w.u64(m.n_invalid);
    w.u64(m.invalid_ids.size());
    for (auto id : m.invalid_ids) w.u64(id);
    w.u64(m.samples.size());
    for (const auto& s : m.samples) {
        w.f64(s.time);
        w.doubles(s.dens_re);
        w.doubles(s.dens_im);
        w.doubles(s.dens_re_sq);
        w.doubles(s.dens_im_sq);
        w.doubles(s.mf_re);
        w.doubles(s.mf_im);
        w.doubles(s.mf_re_sq);
        w.doubles(s.mf_im_sq);
        w.complexes(s.pair_sums);
        w.complexes(s.quadrants);
        w.complexes(s.total);
        w.complexes(s.scattered);
    }
    return w.take();
}

EnsembleMoments deserialize_moments(std::string_view bytes) {
    Reader r(bytes);
    if (r.u64() != kMagic) throw ConfigError("not a moments checkpoint");
    EnsembleMoments m;
    for (int a = 0; a < 3; ++a) m.points[a] = static_cast<int>(r.u64());
    for (int a = 0; a < 3; ++a) m.lengths[a] = r.f64();
    m.spec.k_r = r.f64();
    m.spec.shell = r.f64();
    m.spec.axial_mask = r.f64();
    m.spec.exclusion = r.f64();
    for (int a = 0; a < 3; ++a) m.spec.max_lag[a] = static_cast<int>(r.u64());
    m.spec.track_mean_field = r.u64() != 0;
    m.n_valid = r.u64();
    m.n_invalid = r.u64();
    m.invalid_ids.resize(r.count());
    for (auto& id : m.invalid_ids) id = r.u64();
    m.samples.resize(r.count());
    for (auto& s : m.samples) {
        s.time = r.f64();
        s.dens_re = r.doubles();
        s.dens_im = r.doubles();
        s.dens_re_sq = r.doubles();
        s.dens_im_sq = r.doubles();
        s.mf_re = r.doubles();
        s.mf_im = r.doubles();
        s.mf_re_sq = r.doubles();
        s.mf_im_sq = r.doubles();
        s.pair_sums = r.complexes();
        s.quadrants = r.complexes();
        s.total = r.complexes();
        s.scattered = r.complexes();
    }
    if (!r.done()) throw ConfigError("checkpoint payload has trailing bytes");
    return m;
}

void write_checkpoint(const fs::path& dir, const CheckpointManifest& manifest,
                      const EnsembleMoments& moments) {
    fs::create_directories(dir);
    const std::string payload = serialize_moments(moments);
    write_file(dir / "moments.bin", payload);
    nlohmann::json j;
    j["config_hash"] = manifest.config_hash;
    j["base_seed"] = manifest.base_seed;
    j["block_size"] = manifest.block_size;
    j["n_trajectories"] = manifest.n_trajectories;
    j["completed_blocks"] = manifest.completed_blocks;
    j["payload_hash"] = hex64(fnv1a64(payload));
    j["n_valid"] = moments.n_valid;
    j["n_invalid"] = moments.n_invalid;
    write_file(dir / "manifest.json", j.dump(2) + "\n");
}

std::optional<std::pair<CheckpointManifest, EnsembleMoments>> read_checkpoint(
    const fs::path& dir, const std::string& expected_hash) {
    if (!fs::exists(dir / "manifest.json")) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint manifest unreadable: ") + e.what());
    }
    CheckpointManifest man;
    man.config_hash = j.at("config_hash").get<std::string>();
    man.base_seed = j.at("base_seed").get<std::uint64_t>();
    man.block_size = j.at("block_size").get<int>();
    man.n_trajectories = j.at("n_trajectories").get<int>();
    man.completed_blocks = j.at("completed_blocks").get<int>();
    man.payload_hash = j.at("payload_hash").get<std::string>();
    if (man.config_hash != expected_hash)
        throw ConfigError("checkpoint config hash " + man.config_hash +
                          " does not match the current config " + expected_hash);
    const std::string payload = read_file(dir / "moments.bin");
    if (hex64(fnv1a64(payload)) != man.payload_hash)
        throw ConfigError("checkpoint payload hash mismatch (corrupt moments.bin)");
    return std::make_pair(man, deserialize_moments(payload));
}

void write_field_snapshot(const fs::path& path, const TrajectorySample& sample,
                          std::uint64_t trajectory_id, std::uint64_t seed,
                          const std::string& config_hash) {
    Writer w;
    for (const auto* v : {&sample.a, &sample.a_tilde})
        for (const cplx& x : *v) {
            w.f64(x.real());
            w.f64(x.imag());
        }
    write_file(path, w.take());
    nlohmann::json j;
    j["trajectory_id"] = trajectory_id;
    j["rng_seed"] = seed;
    j["time_s"] = sample.time;
    j["config_hash"] = config_hash;
    j["layout"] = "float64-le (re, im) pairs: a(k) then a~(k), transform order";
    j["bins"] = sample.a.size();
    write_file(path.string() + ".json", j.dump(2) + "\n");
}

}  // namespace bec4wm
