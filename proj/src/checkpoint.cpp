#include "waveuie/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "waveuie/errors.hpp"

namespace waveuie {

namespace {

constexpr char kMagic[8] = {'W', 'U', 'I', 'E', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_string(const std::string& s) {
        put<std::uint64_t>(s.size());
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void put_floats(const std::vector<float>& v) {
        put<std::uint64_t>(v.size());
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        bytes.insert(bytes.end(), p, p + v.size() * sizeof(float));
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::size_t end, std::string origin)
        : bytes_(bytes), end_(end), origin_(std::move(origin)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint64_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<float> get_floats() {
        const auto n = get<std::uint64_t>();
        if (n > (end_ - pos_) / sizeof(float)) fail("truncated");
        std::vector<float> v(n);
        std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
        return v;
    }
    bool done() const { return pos_ == end_; }
    [[noreturn]] void fail(const std::string& why) const { throw IoError(origin_ + ": " + why); }

private:
    void need(std::uint64_t n) const {
        if (n > end_ - pos_) fail("truncated");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
    std::string origin_;
};

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = crc32(c, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

std::vector<float> to_floats(std::span<const double> v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

}  // namespace

Checkpoint capture(const RunConfig& config, ModelBundle& bundle, const TrainState& state) {
    Checkpoint c{config, bundle.seed, state, {}};
    for (Parameter* p : bundle.all_parameters()) {
        c.params.push_back({p->name, p->value.shape(), to_floats(p->value.data()), p->mean_square});
    }
    return c;
}

void restore(const Checkpoint& checkpoint, ModelBundle& bundle) {
    std::map<std::string, const ParamBlob*> by_name;
    for (const auto& b : checkpoint.params) by_name[b.name] = &b;
    const auto params = bundle.all_parameters();
    if (by_name.size() != params.size()) {
        throw IoError("checkpoint holds " + std::to_string(by_name.size()) + " parameters, model expects " +
                      std::to_string(params.size()));
    }
    for (Parameter* p : params) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end()) throw IoError("checkpoint lacks parameter " + p->name);
        const ParamBlob& b = *it->second;
        if (b.shape != p->value.shape() || b.values.size() != static_cast<std::size_t>(p->numel()) ||
            b.mean_square.size() != p->mean_square.size()) {
            throw IoError("checkpoint parameter " + p->name + " has shape " + shape_to_string(b.shape) +
                          ", model expects " + shape_to_string(p->value.shape()));
        }
        p->assign(std::vector<double>(b.values.begin(), b.values.end()));
        p->mean_square = b.mean_square;
    }
    bundle.seed = checkpoint.seed;
}

ModelBundle build_bundle(const Checkpoint& checkpoint) {
    ModelBundle bundle(checkpoint.config.model, checkpoint.seed);
    restore(checkpoint, bundle);
    return bundle;
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
    Writer w;
    w.bytes.insert(w.bytes.end(), kMagic, kMagic + 8);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put_string(to_text(c.config));
    w.put<std::uint64_t>(c.seed);
    w.put<std::int64_t>(c.state.epoch);
    w.put<std::uint64_t>(c.state.global_step);
    for (double v : {c.state.last.l_s, c.state.last.l_d, c.state.last.l_adv, c.state.last.critic, c.state.last.total,
                     c.state.best_l_s}) {
        w.put<double>(v);
    }
    w.put<std::int64_t>(c.state.best_epoch);
    w.put<std::uint64_t>(c.params.size());
    for (const auto& p : c.params) {
        w.put_string(p.name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.shape.size()));
        for (auto d : p.shape) w.put<std::int64_t>(d);
        w.put_floats(p.values);
        w.put_floats(p.mean_square);
    }
    w.put<std::uint32_t>(crc(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw IoError(origin + ": not a checkpoint");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 8, 4);
    if (version != kCheckpointVersion) {
        throw IoError(origin + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, 4);
    if (crc(bytes.data(), body) != stored) throw IoError(origin + ": checksum mismatch, file is corrupted");

    Reader r(bytes, body, origin);
    for (int i = 0; i < 12; ++i) r.get<std::uint8_t>();
    Checkpoint c;
    try {
        c.config = parse_config(r.get_string());
    } catch (const UsageError& e) {
        r.fail(std::string("embedded config rejected: ") + e.what());
    }
    c.seed = r.get<std::uint64_t>();
    c.state.epoch = static_cast<int>(r.get<std::int64_t>());
    c.state.global_step = r.get<std::uint64_t>();
    c.state.last.l_s = r.get<double>();
    c.state.last.l_d = r.get<double>();
    c.state.last.l_adv = r.get<double>();
    c.state.last.critic = r.get<double>();
    c.state.last.total = r.get<double>();
    c.state.best_l_s = r.get<double>();
    c.state.best_epoch = static_cast<int>(r.get<std::int64_t>());
    const auto count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        ParamBlob p;
        p.name = r.get_string();
        const auto ndim = r.get<std::uint32_t>();
        if (ndim > 8) r.fail("bad rank for " + p.name);
        for (std::uint32_t d = 0; d < ndim; ++d) p.shape.push_back(r.get<std::int64_t>());
        p.values = r.get_floats();
        p.mean_square = r.get_floats();
        c.params.push_back(std::move(p));
    }
    if (!r.done()) r.fail("trailing bytes");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const auto bytes = serialize(checkpoint);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
    return deserialize(bytes, path.string());
}

}  // namespace waveuie
