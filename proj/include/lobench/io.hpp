#pragma once

#include "lobench/model.hpp"
#include "lobench/pipeline.hpp"
#include "lobench/synth.hpp"
#include "lobench/types.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

// File formats
//
// Order flow (text): optional `# key=value` metadata lines, then the header
//   timestamp_ns,id,side,kind,price_ticks,volume,target_id
// and one order per line; inapplicable fields are empty.
//
// Binary files are little-endian and start with a 4-byte magic and a u32 version.
//   Day series "LOBS": u32 name length, name, i32 day, u32 levels, u64 count,
//                      i64 timestamps[count], f64 values[count][4*levels] (field-major rows).
//   Dataset    "LOBD": u32 instrument count, {u32 length, name}..., u64 windows, u32 steps,
//                      u32 columns, then per window: u32 instrument index, i32 day, i32 start,
//                      i8 label (-1/0/1, or 127 when absent), u32 mask count, i32 mask[...],
//                      f64 data[steps][columns].
//   Checkpoint "LOBC": u32 metadata length, metadata (key=value text), u32 tensor count,
//                      per tensor: u32 name length, name, u32 rank, u64 dims[rank], f64 values.
// Malformed input raises ValidationError naming the byte offset and field; unreadable
// paths raise IoError.

namespace lobench {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Streaming order-flow reader.
class OrderFlowReader {
public:
    explicit OrderFlowReader(std::istream& in, std::string source = "order flow");
    std::optional<Order> next();
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

private:
    [[noreturn]] void fail(const std::string& field, const std::string& why) const;

    std::istream& in_;
    std::string source_;
    std::map<std::string, std::string> metadata_;
    std::size_t line_offset_ = 0;
    std::size_t next_offset_ = 0;
    bool header_seen_ = false;
};

std::string format_order_flow(const FlowStream& stream);
FlowStream parse_order_flow(const std::string& text, const std::string& source = "order flow");

std::string encode_day_series(const DaySeries& series);
DaySeries decode_day_series(const std::string& bytes, const std::string& source = "day series");

struct Dataset {
    int steps = 100;
    int columns = 40;
    std::vector<Window> windows;
};
std::string encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::string& bytes, const std::string& source = "dataset");

struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<NamedTensor> tensors;

    const NamedTensor& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source = "checkpoint");

// Full network (+ optional optimizer state) to a checkpoint and back.
Checkpoint to_checkpoint(Network& net, const AdamState* adam = nullptr);
Network network_from_checkpoint(const Checkpoint& ckpt, AdamState* adam = nullptr);
// Head parameters only, tagged as a delta on top of `base_digest`.
Checkpoint head_delta_checkpoint(TaskHead& head, const std::string& base_digest, const AdamState* adam = nullptr);
// Replaces the head of `net` with the delta's head.
void apply_head_delta(Network& net, const Checkpoint& delta);

}  // namespace lobench
