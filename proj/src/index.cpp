#include "rrk/index.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <mutex>
#include <set>
#include <thread>

#include "rrk/binio.hpp"
#include "rrk/fileio.hpp"

namespace rrk {
namespace {

constexpr std::string_view kMagic{"RRKIDX1\0", 8};

}  // namespace

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::F32;
  if (s == "f16") return DType::F16;
  throw ConfigError("unknown dtype '" + s + "' (f32|f16)");
}

const char* dtype_name(DType d) { return d == DType::F32 ? "f32" : "f16"; }
std::size_t dtype_bytes(DType d) { return d == DType::F32 ? 4 : 2; }

std::uint16_t float_to_half(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t abs = x & 0x7fffffffu;
  if (abs >= 0x7f800000u) {  // inf or nan
    return static_cast<std::uint16_t>(sign | 0x7c00u | (abs > 0x7f800000u ? 0x200u : 0u));
  }
  if (abs >= 0x477ff000u) return static_cast<std::uint16_t>(sign | 0x7c00u);  // rounds past max half
  const int exp = static_cast<int>(abs >> 23) - 127;
  std::uint32_t mant = abs & 0x7fffffu;
  if (exp >= -14) {
    // normal half: keep 10 mantissa bits, round the 13 dropped ones to nearest even
    std::uint32_t h = (static_cast<std::uint32_t>(exp + 15) << 10) | (mant >> 13);
    const std::uint32_t rest = mant & 0x1fffu;
    if (rest > 0x1000u || (rest == 0x1000u && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }
  if (exp < -25) return static_cast<std::uint16_t>(sign);
  // subnormal half
  mant |= 0x800000u;
  const int shift = -exp - 14 + 13;
  std::uint32_t h = mant >> shift;
  const std::uint32_t rest = mant & ((1u << shift) - 1);
  const std::uint32_t half = 1u << (shift - 1);
  if (rest > half || (rest == half && (h & 1u))) ++h;
  return static_cast<std::uint16_t>(sign | h);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  if (exp == 0x1f) return std::bit_cast<float>(sign | 0x7f800000u | (mant << 13));
  if (exp == 0) {
    if (mant == 0) return std::bit_cast<float>(sign);
    int e = -1;
    do {
      ++e;
      mant <<= 1;
    } while ((mant & 0x400u) == 0);
    return std::bit_cast<float>(sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3ffu) << 13));
  }
  return std::bit_cast<float>(sign | ((exp + 127 - 15) << 23) | (mant << 13));
}

std::string encode_index(std::vector<CompressedDoc<float>> docs, std::uint32_t l, std::uint32_t d_model,
                         DType dtype) {
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].doc_id.empty()) throw IdError("empty document id in index build");
    if (i && docs[i].doc_id == docs[i - 1].doc_id) throw IdError("duplicate document id " + docs[i].doc_id);
    if (docs[i].embeddings.size() != static_cast<std::size_t>(l) * d_model) {
      throw DimensionError("document " + docs[i].doc_id + " has " + std::to_string(docs[i].embeddings.size()) +
                           " values, index expects " + std::to_string(l) + "x" + std::to_string(d_model));
    }
  }
  std::string out(kMagic);
  bin::put_u32(out, kIndexVersion);
  bin::put_u32(out, l);
  bin::put_u32(out, d_model);
  bin::put_u32(out, static_cast<std::uint32_t>(dtype));
  bin::put_u64(out, docs.size());
  for (const auto& d : docs) {
    bin::put_str(out, d.doc_id);
    for (float v : d.embeddings.data()) {
      if (dtype == DType::F32) {
        bin::put_f32(out, v);
      } else {
        bin::put_u16(out, float_to_half(v));
      }
    }
  }
  return out;
}

IndexBuildStats build_index(const std::vector<Document>& corpus, const Transformer<float>& compressor,
                            const Tokenizer& tokenizer, const IndexBuildOptions& options,
                            const std::filesystem::path& path) {
  {
    std::set<std::string_view> seen;
    for (const auto& d : corpus) {
      if (d.id.empty()) throw IdError("empty document id in corpus");
      if (!seen.insert(d.id).second) throw IdError("duplicate document id " + d.id);
    }
  }
  std::vector<CompressedDoc<float>> docs(corpus.size());
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, corpus.size()));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t t) {
    try {
      for (std::size_t i = t; i < corpus.size(); i += threads) {
        docs[i] = compress(compressor, corpus[i].id, tokenizer.encode(corpus[i].text), options.max_doc_len);
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  const auto& c = compressor.config();
  const auto bytes = encode_index(std::move(docs), c.mem_tokens, c.d_model, options.dtype);
  write_file_atomic(path, bytes);
  return {corpus.size(), bytes.size(),
          storage_estimate(corpus.size(), c.mem_tokens, c.d_model, dtype_bytes(options.dtype))};
}

CompressedIndex CompressedIndex::open(const std::filesystem::path& path) {
  return from_bytes(read_file(path));
}

CompressedIndex CompressedIndex::from_bytes(std::string bytes) {
  CompressedIndex idx;
  idx.bytes_ = std::move(bytes);
  bin::Reader r(idx.bytes_, "index");
  if (r.remaining() < kIndexHeaderBytes) r.fail("file shorter than the header");
  if (r.take(kMagic.size()) != kMagic) r.fail("bad magic");
  idx.header_.version = r.u32();
  if (idx.header_.version != kIndexVersion) r.fail("unsupported version " + std::to_string(idx.header_.version));
  idx.header_.l = r.u32();
  idx.header_.d_model = r.u32();
  const auto dtype = r.u32();
  if (dtype > 1) r.fail("unknown dtype " + std::to_string(dtype));
  idx.header_.dtype = static_cast<DType>(dtype);
  idx.header_.doc_count = r.u64();
  const std::uint64_t payload =
      static_cast<std::uint64_t>(idx.header_.l) * idx.header_.d_model * dtype_bytes(idx.header_.dtype);
  if (idx.header_.doc_count > r.remaining() / (4 + payload)) {
    r.fail("header claims " + std::to_string(idx.header_.doc_count) + " records but only " +
           std::to_string(r.remaining()) + " bytes follow");
  }
  idx.offsets_.reserve(idx.header_.doc_count);
  for (std::uint64_t i = 0; i < idx.header_.doc_count; ++i) {
    idx.offsets_.push_back(r.pos());
    const auto id_len = r.u32();
    const auto id = r.take(id_len);
    r.take(payload);
    if (i && !(idx.id_at(i - 1) < id)) r.fail("record " + std::to_string(i) + " out of order");
  }
  if (!r.done()) r.fail(std::to_string(r.remaining()) + " trailing bytes after the last record");
  return idx;
}

std::string_view CompressedIndex::id_at(std::size_t i) const {
  bin::Reader r(bytes_, "index");
  r.seek(offsets_[i]);
  const auto n = r.u32();
  return r.take(n);
}

CompressedDoc<float> CompressedIndex::record_at(std::size_t i) const {
  bin::Reader r(bytes_, "index");
  r.seek(offsets_[i]);
  CompressedDoc<float> doc;
  doc.doc_id = r.str();
  const std::size_t n = static_cast<std::size_t>(header_.l) * header_.d_model;
  std::vector<float> values(n);
  for (auto& v : values) v = header_.dtype == DType::F32 ? r.f32() : half_to_float(r.u16());
  doc.embeddings = Tensor<float>::from_data({header_.l, header_.d_model}, std::move(values));
  return doc;
}

std::optional<std::size_t> CompressedIndex::find(std::string_view doc_id, std::size_t* comparisons) const {
  std::size_t lo = 0, hi = offsets_.size(), count = 0;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const int c = id_at(mid).compare(doc_id);
    ++count;
    if (c == 0) {
      if (comparisons) *comparisons = count;
      return mid;
    }
    if (c < 0) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (comparisons) *comparisons = count;
  return std::nullopt;
}

std::optional<CompressedDoc<float>> CompressedIndex::get(std::string_view doc_id) const {
  const auto i = find(doc_id);
  if (!i) return std::nullopt;
  return record_at(*i);
}

std::vector<Lookup> CompressedIndex::get_many(const std::vector<std::string>& doc_ids) const {
  std::vector<Lookup> out;
  out.reserve(doc_ids.size());
  for (const auto& id : doc_ids) out.push_back({id, get(id)});
  return out;
}

std::vector<std::string> CompressedIndex::ids() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < offsets_.size(); ++i) out.emplace_back(id_at(i));
  return out;
}

std::uint64_t storage_estimate(std::uint64_t n_docs, std::uint64_t c, std::uint64_t h,
                               std::uint64_t bytes_per_value) {
  if (n_docs == 0 || c == 0 || h == 0 || bytes_per_value == 0) {
    throw ContractError("storage_estimate arguments must be positive");
  }
  return n_docs * c * h * bytes_per_value;
}

}  // namespace rrk
