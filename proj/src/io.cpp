#include "lobench/io.hpp"

#include "lobench/error.hpp"
#include "lobench/text_format.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lobench {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------------------
// order flow

namespace {
constexpr const char* kFlowHeader = "timestamp_ns,id,side,kind,price_ticks,volume,target_id";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}
}  // namespace

OrderFlowReader::OrderFlowReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

void OrderFlowReader::fail(const std::string& field, const std::string& why) const {
    throw ValidationError(source_ + ": byte " + std::to_string(line_offset_) + ", field '" + field + "': " + why);
}

std::optional<Order> OrderFlowReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        line_offset_ = next_offset_;
        next_offset_ += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                auto key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(' '));
                metadata_[key] = line.substr(eq + 1);
            }
            continue;
        }
        if (!header_seen_) {
            if (line != kFlowHeader) fail("header", "expected '" + std::string(kFlowHeader) + "'");
            header_seen_ = true;
            continue;
        }
        const auto cols = split_csv(line);
        static const char* names[] = {"timestamp_ns", "id", "side", "kind", "price_ticks", "volume", "target_id"};
        if (cols.size() != 7) fail("line", "expected 7 fields, got " + std::to_string(cols.size()));
        const auto integer = [&](int c) -> std::optional<std::int64_t> {
            if (cols[c].empty()) return std::nullopt;
            std::int64_t v = 0;
            auto res = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), v);
            if (res.ec != std::errc() || res.ptr != cols[c].data() + cols[c].size()) fail(names[c], "not an integer");
            return v;
        };
        Order o;
        const auto ts = integer(0);
        const auto id = integer(1);
        if (!ts) fail(names[0], "missing");
        if (!id) fail(names[1], "missing");
        o.timestamp = *ts;
        o.id = *id;
        if (cols[2] == "bid") o.side = Side::bid;
        else if (cols[2] == "ask") o.side = Side::ask;
        else fail(names[2], "expected bid or ask");
        if (cols[3] == "limit") o.kind = OrderKind::limit;
        else if (cols[3] == "market") o.kind = OrderKind::market;
        else if (cols[3] == "cancel") o.kind = OrderKind::cancel;
        else fail(names[3], "expected limit, market or cancel");
        o.price = integer(4);
        o.volume = integer(5);
        o.target_id = integer(6);
        try {
            validate_order(o);
        } catch (const ValidationError& e) {
            fail(names[3], e.what());
        }
        return o;
    }
    if (!header_seen_) fail("header", "missing");
    return std::nullopt;
}

std::string format_order_flow(const FlowStream& stream) {
    std::string out;
    out += "# instrument=" + stream.instrument + '\n';
    out += "# day=" + std::to_string(stream.day) + '\n';
    out += kFlowHeader;
    out += '\n';
    const auto opt = [](const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : std::string(); };
    for (const auto& o : stream.orders) {
        out += std::to_string(o.timestamp);
        out += ',' + std::to_string(o.id);
        out += o.side == Side::bid ? ",bid" : ",ask";
        out += o.kind == OrderKind::limit ? ",limit" : o.kind == OrderKind::market ? ",market" : ",cancel";
        out += ',' + opt(o.price) + ',' + opt(o.volume) + ',' + opt(o.target_id) + '\n';
    }
    return out;
}

FlowStream parse_order_flow(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    OrderFlowReader reader(in, source);
    FlowStream stream;
    while (auto o = reader.next()) stream.orders.push_back(*o);
    const auto& meta = reader.metadata();
    if (auto it = meta.find("instrument"); it != meta.end()) stream.instrument = it->second;
    if (auto it = meta.find("day"); it != meta.end()) stream.day = std::stoi(it->second);
    return stream;
}

// ---------------------------------------------------------------------------
// binary helpers

namespace {

class BinaryWriter {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        buf_ += s;
    }
    void put_doubles(const double* data, std::size_t n) {
        buf_.append(reinterpret_cast<const char*>(data), n * sizeof(double));
    }
    void magic(const char (&m)[5], std::uint32_t version) {
        buf_.append(m, 4);
        put(version);
    }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class BinaryReader {
public:
    BinaryReader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& why) const {
        throw ValidationError(source_ + ": byte " + std::to_string(pos_) + ", field '" + field + "': " + why);
    }
    // For a field that was read fine but holds a bad value.
    [[noreturn]] void reject(const std::string& field, const std::string& why) const {
        auto it = starts_.find(field);
        throw ValidationError(source_ + ": byte " + std::to_string(it == starts_.end() ? pos_ : it->second) +
                              ", field '" + field + "': " + why);
    }

    template <class T>
    T get(const char* field) {
        starts_[field] = pos_;
        if (pos_ + sizeof(T) > bytes_.size()) fail(field, "truncated");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string(const char* field) {
        const auto n = get<std::uint32_t>(field);
        if (pos_ + n > bytes_.size()) fail(field, "truncated");
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void get_doubles(const char* field, double* out, std::size_t n) {
        if (n > (bytes_.size() - pos_) / sizeof(double)) fail(field, "truncated");
        std::memcpy(out, bytes_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
    }
    void expect_magic(const char (&m)[5], std::uint32_t version) {
        if (bytes_.size() < 4 || bytes_.compare(0, 4, m, 4) != 0) fail("magic", std::string("expected ") + m);
        pos_ = 4;
        const auto v = get<std::uint32_t>("version");
        if (v != version) {
            pos_ -= 4;
            fail("version", "unsupported version " + std::to_string(v));
        }
    }
    void expect_end() const {
        if (pos_ != bytes_.size()) fail("trailer", "unexpected trailing bytes");
    }

private:
    const std::string& bytes_;
    std::string source_;
    std::size_t pos_ = 0;
    std::map<std::string, std::size_t> starts_;
};

constexpr std::uint32_t kVersion = 1;
constexpr std::int8_t kNoLabel = 127;

}  // namespace

std::string encode_day_series(const DaySeries& series) {
    BinaryWriter w;
    w.magic("LOBS", kVersion);
    w.put_string(series.instrument);
    w.put(static_cast<std::int32_t>(series.day));
    w.put(static_cast<std::uint32_t>(series.levels));
    w.put(static_cast<std::uint64_t>(series.size()));
    for (const auto& s : series.snapshots) w.put(static_cast<std::int64_t>(s.time));
    for (const auto& s : series.snapshots) {
        if (s.depth() != series.levels) throw ValidationError("encode_day_series: snapshot depth mismatch");
        const Vector v = flatten(s);
        w.put_doubles(v.data(), v.size());
    }
    return w.take();
}

DaySeries decode_day_series(const std::string& bytes, const std::string& source) {
    BinaryReader r(bytes, source);
    r.expect_magic("LOBS", kVersion);
    DaySeries series;
    series.instrument = r.get_string("instrument");
    series.day = r.get<std::int32_t>("day");
    series.levels = static_cast<int>(r.get<std::uint32_t>("levels"));
    if (series.levels < 1) r.reject("levels", "must be >= 1");
    const auto count = r.get<std::uint64_t>("count");
    if (count > bytes.size() / sizeof(std::int64_t)) r.reject("count", "larger than the file");
    series.snapshots.resize(count);
    for (auto& s : series.snapshots) s.time = r.get<std::int64_t>("timestamps");
    Vector v(4 * series.levels);
    for (auto& s : series.snapshots) {
        r.get_doubles("values", v.data(), v.size());
        const Timestamp t = s.time;
        s = unflatten(v, series.levels, t);
    }
    r.expect_end();
    return series;
}

std::string encode_dataset(const Dataset& data) {
    BinaryWriter w;
    w.magic("LOBD", kVersion);
    std::vector<std::string> names;
    std::map<std::string, std::uint32_t> index;
    for (const auto& win : data.windows)
        if (index.emplace(win.origin.instrument, static_cast<std::uint32_t>(names.size())).second)
            names.push_back(win.origin.instrument);
    w.put(static_cast<std::uint32_t>(names.size()));
    for (const auto& n : names) w.put_string(n);
    w.put(static_cast<std::uint64_t>(data.windows.size()));
    w.put(static_cast<std::uint32_t>(data.steps));
    w.put(static_cast<std::uint32_t>(data.columns));
    for (const auto& win : data.windows) {
        if (win.data.rows() != data.steps || win.data.cols() != data.columns)
            throw ValidationError("encode_dataset: window shape differs from the dataset shape");
        w.put(index.at(win.origin.instrument));
        w.put(static_cast<std::int32_t>(win.origin.day));
        w.put(static_cast<std::int32_t>(win.origin.start));
        w.put(win.label ? static_cast<std::int8_t>(*win.label) : kNoLabel);
        w.put(static_cast<std::uint32_t>(win.mask.size()));
        for (int m : win.mask) w.put(static_cast<std::int32_t>(m));
        w.put_doubles(win.data.data(), win.data.size());
    }
    return w.take();
}

Dataset decode_dataset(const std::string& bytes, const std::string& source) {
    BinaryReader r(bytes, source);
    r.expect_magic("LOBD", kVersion);
    std::vector<std::string> names(r.get<std::uint32_t>("instrument_count"));
    for (auto& n : names) n = r.get_string("instrument");
    Dataset d;
    const auto count = r.get<std::uint64_t>("window_count");
    d.steps = static_cast<int>(r.get<std::uint32_t>("steps"));
    d.columns = static_cast<int>(r.get<std::uint32_t>("columns"));
    if (d.steps < 1 || d.columns < 4 || d.columns % 4 != 0) r.reject("columns", "bad window shape");
    if (count > bytes.size() / (static_cast<std::uint64_t>(d.steps) * d.columns * sizeof(double)))
        r.reject("window_count", "larger than the file");
    d.windows.resize(count);
    for (auto& win : d.windows) {
        const auto idx = r.get<std::uint32_t>("instrument_index");
        if (idx >= names.size()) r.reject("instrument_index", "out of range");
        win.origin.instrument = names[idx];
        win.origin.day = r.get<std::int32_t>("day");
        win.origin.start = r.get<std::int32_t>("start");
        const auto label = r.get<std::int8_t>("label");
        if (label == -1 || label == 0 || label == 1) win.label = static_cast<Trend>(label);
        else if (label != kNoLabel) r.reject("label", "expected -1, 0, 1 or absent");
        const auto masks = r.get<std::uint32_t>("mask_count");
        if (masks > static_cast<std::uint32_t>(d.steps)) r.reject("mask_count", "exceeds window length");
        win.mask.resize(masks);
        for (auto& m : win.mask) {
            m = r.get<std::int32_t>("mask");
            if (m < 0 || m >= d.steps) r.reject("mask", "index out of range");
        }
        win.data.resize(d.steps, d.columns);
        r.get_doubles("data", win.data.data(), win.data.size());
    }
    r.expect_end();
    return d;
}

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw ValidationError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return true;
    return false;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    BinaryWriter w;
    w.magic("LOBC", kVersion);
    KeyValueWriter meta;
    for (const auto& [k, v] : ckpt.meta) meta.put(k, v);
    w.put_string(meta.str());
    w.put(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        w.put_string(t.name);
        w.put(static_cast<std::uint32_t>(t.shape.size()));
        std::uint64_t n = 1;
        for (auto d : t.shape) {
            w.put(d);
            n *= d;
        }
        if (n != t.values.size()) throw ValidationError("checkpoint tensor '" + t.name + "' shape/value mismatch");
        w.put_doubles(t.values.data(), t.values.size());
    }
    return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
    BinaryReader r(bytes, source);
    r.expect_magic("LOBC", kVersion);
    Checkpoint c;
    const KeyValueReader meta(r.get_string("metadata"), source + " metadata");
    c.meta = meta.values();
    const auto count = r.get<std::uint32_t>("tensor_count");
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.get_string("tensor_name");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > 8) r.reject("rank", "too large");
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            t.shape.push_back(r.get<std::uint64_t>("dims"));
            n *= t.shape.back();
        }
        if (n > bytes.size() / sizeof(double)) r.reject("dims", "larger than the file");
        t.values.resize(n);
        r.get_doubles("values", t.values.data(), n);
        c.tensors.push_back(std::move(t));
    }
    r.expect_end();
    return c;
}

namespace {

void add_adam(Checkpoint& c, const AdamState& adam, const std::vector<ParamView>& params) {
    c.meta["adam.step"] = std::to_string(adam.step);
    c.meta["adam.lr"] = format_double(adam.config.lr);
    c.meta["adam.beta1"] = format_double(adam.config.beta1);
    c.meta["adam.beta2"] = format_double(adam.config.beta2);
    c.meta["adam.epsilon"] = format_double(adam.config.epsilon);
    for (const auto& p : params) {
        auto m = adam.first.find(p.name);
        auto v = adam.second.find(p.name);
        if (m == adam.first.end() || v == adam.second.end()) continue;
        c.tensors.push_back({"adam.m." + p.name, p.shape, {m->second.data(), m->second.data() + m->second.size()}});
        c.tensors.push_back({"adam.v." + p.name, p.shape, {v->second.data(), v->second.data() + v->second.size()}});
    }
}

void read_adam(const Checkpoint& c, AdamState& adam, const std::vector<ParamView>& params) {
    const auto get = [&](const std::string& k) {
        return KeyValueReader(k + "=" + c.meta.at(k), "checkpoint metadata").get_double(k);
    };
    if (!c.meta.contains("adam.step")) return;
    adam.step = std::stoull(c.meta.at("adam.step"));
    adam.config.lr = get("adam.lr");
    adam.config.beta1 = get("adam.beta1");
    adam.config.beta2 = get("adam.beta2");
    adam.config.epsilon = get("adam.epsilon");
    for (const auto& p : params) {
        if (!c.has_tensor("adam.m." + p.name)) continue;
        const auto& m = c.tensor("adam.m." + p.name).values;
        const auto& v = c.tensor("adam.v." + p.name).values;
        adam.first[p.name] = Eigen::Map<const Vector>(m.data(), m.size());
        adam.second[p.name] = Eigen::Map<const Vector>(v.data(), v.size());
    }
}

void add_params(Checkpoint& c, const std::vector<ParamView>& params) {
    for (const auto& p : params) c.tensors.push_back({p.name, p.shape, {p.values.begin(), p.values.end()}});
}

void describe_head(Checkpoint& c, const TaskHead& head) {
    c.meta["task"] = to_string(head.kind);
    c.meta["head.layers"] = std::to_string(head.layers.size());
    for (std::size_t i = 0; i < head.layers.size(); ++i)
        c.meta["head." + std::to_string(i) + ".activation"] = to_string(head.layers[i].activation);
}

const std::string& meta_at(const Checkpoint& c, const std::string& key) {
    auto it = c.meta.find(key);
    if (it == c.meta.end()) throw ValidationError("checkpoint: missing metadata '" + key + "'");
    return it->second;
}

Dense load_dense(const Checkpoint& c, const std::string& name, Activation act) {
    const auto& w = c.tensor(name + ".weight");
    const auto& b = c.tensor(name + ".bias");
    if (w.shape.size() != 2 || b.shape.size() != 1 || b.shape[0] != w.shape[0])
        throw ValidationError("checkpoint: inconsistent shapes for layer '" + name + "'");
    Dense d;
    d.activation = act;
    d.weight = Eigen::Map<const RowMatrix>(w.values.data(), static_cast<Eigen::Index>(w.shape[0]),
                                           static_cast<Eigen::Index>(w.shape[1]));
    d.bias = Eigen::Map<const Vector>(b.values.data(), static_cast<Eigen::Index>(b.values.size()));
    return d;
}

TaskHead load_head(const Checkpoint& c) {
    TaskHead head;
    head.kind = parse_task(meta_at(c, "task"));
    const int layers = std::stoi(meta_at(c, "head.layers"));
    for (int i = 0; i < layers; ++i) {
        const std::string name = "head." + std::to_string(i);
        head.layers.push_back(load_dense(c, name, parse_activation(meta_at(c, name + ".activation"))));
    }
    for (std::size_t i = 1; i < head.layers.size(); ++i)
        if (head.layers[i].inputs() != head.layers[i - 1].outputs())
            throw ValidationError("checkpoint: head layer dimensions do not chain");
    return head;
}

}  // namespace

Checkpoint to_checkpoint(Network& net, const AdamState* adam) {
    Checkpoint c;
    c.meta["format"] = "full";
    c.meta["steps"] = std::to_string(net.steps);
    c.meta["columns"] = std::to_string(net.columns);
    c.meta["encoder.activation"] = to_string(net.encoder.activation);
    describe_head(c, net.head);
    const auto params = parameters(net);
    add_params(c, params);
    if (adam) add_adam(c, *adam, params);
    return c;
}

Network network_from_checkpoint(const Checkpoint& c, AdamState* adam) {
    if (meta_at(c, "format") != "full") throw ValidationError("checkpoint: expected a full checkpoint");
    Network net;
    net.steps = std::stoi(meta_at(c, "steps"));
    net.columns = std::stoi(meta_at(c, "columns"));
    net.encoder = load_dense(c, "encoder", parse_activation(meta_at(c, "encoder.activation")));
    net.head = load_head(c);
    if (net.encoder.inputs() != static_cast<Eigen::Index>(net.steps) * net.columns ||
        net.head.inputs() != net.encoder.outputs())
        throw ValidationError("checkpoint: layer dimensions do not chain");
    if (adam) read_adam(c, *adam, parameters(net));
    return net;
}

Checkpoint head_delta_checkpoint(TaskHead& head, const std::string& base_digest, const AdamState* adam) {
    Checkpoint c;
    c.meta["format"] = "head-delta";
    c.meta["base"] = base_digest;
    describe_head(c, head);
    const auto params = parameters(head);
    add_params(c, params);
    if (adam) add_adam(c, *adam, params);
    return c;
}

void apply_head_delta(Network& net, const Checkpoint& delta) {
    if (meta_at(delta, "format") != "head-delta") throw ValidationError("checkpoint: expected a head delta");
    TaskHead head = load_head(delta);
    if (head.inputs() != net.encoder.outputs()) throw ValidationError("head delta does not fit the encoder");
    net.head = std::move(head);
}

}  // namespace lobench
