#include "danse/io.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

namespace danse::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raw doubles are written on little-endian hosts only; all supported
// targets here are little-endian.
static_assert(std::endian::native == std::endian::little,
              "payload format is little-endian");

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ParseError("cannot open for writing: " + path);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void append_doubles(std::string& buf, const double* data, size_t count) {
  buf.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

json parse_manifest(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid manifest JSON: " + path);
  return j;
}

std::string payload_path(const std::string& manifest_path,
                         const json& manifest) {
  const std::string name = manifest.at("payload").get<std::string>();
  return (fs::path(manifest_path).parent_path() / name).string();
}

std::string read_payload(const std::string& manifest_path,
                         const json& manifest) {
  const std::string raw = read_file(payload_path(manifest_path, manifest));
  const auto expected = manifest.at("payload_bytes").get<std::uint64_t>();
  if (raw.size() != expected)
    throw ParseError("payload size mismatch (truncated or corrupt)");
  return raw;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Eigen::MatrixXd();
  const int cols = static_cast<int>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

}  // namespace

void write_bundle(const std::string& path, const ssm::TrajectoryBundle& b,
                  const Eigen::MatrixXd& H) {
  const int n = b.size() > 0 ? static_cast<int>(b.measurements[0].cols()) : 0;
  const int m = static_cast<int>(H.cols());

  std::string payload;
  for (const auto& y : b.measurements) {
    // Row-major per trajectory.
    for (int t = 0; t < y.rows(); ++t)
      for (int j = 0; j < y.cols(); ++j) {
        const double v = y(t, j);
        append_doubles(payload, &v, 1);
      }
  }
  if (b.has_states)
    for (const auto& x : b.states)
      for (int t = 0; t < x.rows(); ++t)
        for (int j = 0; j < x.cols(); ++j) {
          const double v = x(t, j);
          append_doubles(payload, &v, 1);
        }

  const std::string payload_name = fs::path(path).filename().string() + ".bin";
  json manifest{
      {"format_version", 1},
      {"m", m},
      {"n", n},
      {"N", b.size()},
      {"lengths", b.lengths()},
      {"has_states", b.has_states},
      {"dtype", "f64le"},
      {"payload", payload_name},
      {"payload_bytes", payload.size()},
      {"H", matrix_to_json(H)},
      {"metadata",
       {{"model", b.meta.model},
        {"sigma_e2", b.meta.sigma_e2},
        {"sigma_w2", b.meta.sigma_w2},
        {"smnr_db", b.meta.smnr_db},
        {"seed", b.meta.seed}}},
  };
  write_file(path, manifest.dump(2) + "\n");
  write_file((fs::path(path).parent_path() / payload_name).string(), payload);
}

LoadedBundle read_bundle(const std::string& path) {
  const json manifest = parse_manifest(path);
  if (manifest.value("format_version", 0) != 1)
    throw ParseError("unsupported bundle format version");
  const int n = manifest.at("n").get<int>();
  const int m = manifest.at("m").get<int>();
  const int N = manifest.at("N").get<int>();
  const auto lengths = manifest.at("lengths").get<std::vector<int>>();
  const bool has_states = manifest.at("has_states").get<bool>();
  if (static_cast<int>(lengths.size()) != N)
    throw ParseError("lengths array size != N");

  std::uint64_t total = 0;
  for (int T : lengths) total += static_cast<std::uint64_t>(T);
  const std::uint64_t want =
      total * (static_cast<std::uint64_t>(n) +
               (has_states ? static_cast<std::uint64_t>(m) : 0)) *
      sizeof(double);
  if (manifest.at("payload_bytes").get<std::uint64_t>() != want)
    throw ParseError("payload_bytes inconsistent with lengths");

  const std::string raw = read_payload(path, manifest);
  const double* p = reinterpret_cast<const double*>(raw.data());

  LoadedBundle out;
  out.H = matrix_from_json(manifest.at("H"));
  out.bundle.has_states = has_states;
  const json& meta = manifest.at("metadata");
  out.bundle.meta.model = meta.value("model", "");
  out.bundle.meta.sigma_e2 = meta.value("sigma_e2", 0.0);
  out.bundle.meta.sigma_w2 = meta.value("sigma_w2", 0.0);
  out.bundle.meta.smnr_db = meta.value("smnr_db", 0.0);
  out.bundle.meta.seed = meta.value("seed", std::uint64_t{0});

  for (int i = 0; i < N; ++i) {
    Eigen::MatrixXd y(lengths[i], n);
    for (int t = 0; t < lengths[i]; ++t)
      for (int j = 0; j < n; ++j) y(t, j) = *p++;
    out.bundle.measurements.push_back(std::move(y));
  }
  if (has_states)
    for (int i = 0; i < N; ++i) {
      Eigen::MatrixXd x(lengths[i], m);
      for (int t = 0; t < lengths[i]; ++t)
        for (int j = 0; j < m; ++j) x(t, j) = *p++;
      out.bundle.states.push_back(std::move(x));
    }
  return out;
}

void write_checkpoint(const std::string& path,
                      const prior_net::PriorNetParams& params) {
  const auto d = params.dims();
  std::string payload;
  json tensors = json::array();
  for (const auto& t : params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"offset", payload.size()}});
    append_doubles(payload, t.data, static_cast<size_t>(t.size));
  }
  const std::string payload_name = fs::path(path).filename().string() + ".bin";
  json manifest{
      {"format_version", 1},
      {"dims", {{"n", d.n}, {"h", d.h}, {"m", d.m}, {"ff", d.ff}}},
      {"dtype", "f64le"},
      {"order", "col-major"},
      {"tensors", tensors},
      {"payload", payload_name},
      {"payload_bytes", payload.size()},
  };
  write_file(path, manifest.dump(2) + "\n");
  write_file((fs::path(path).parent_path() / payload_name).string(), payload);
}

prior_net::PriorNetParams read_checkpoint(const std::string& path) {
  const json manifest = parse_manifest(path);
  if (manifest.value("format_version", 0) != 1)
    throw ParseError("unsupported checkpoint format version");
  prior_net::Dims d;
  d.n = manifest.at("dims").at("n").get<int>();
  d.h = manifest.at("dims").at("h").get<int>();
  d.m = manifest.at("dims").at("m").get<int>();
  d.ff = manifest.at("dims").at("ff").get<int>();

  const std::string raw = read_payload(path, manifest);
  auto params = prior_net::PriorNetParams::zeros(d);
  auto refs = params.tensors();

  size_t loaded = 0;
  for (const auto& tj : manifest.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    const auto offset = tj.at("offset").get<std::uint64_t>();
    bool found = false;
    for (auto& r : refs) {
      if (name != r.name) continue;
      if (tj.at("rows").get<long>() != r.rows ||
          tj.at("cols").get<long>() != r.cols)
        throw ParseError("checkpoint tensor shape mismatch: " + name);
      if (offset + r.size * sizeof(double) > raw.size())
        throw ParseError("checkpoint tensor out of payload bounds: " + name);
      std::memcpy(r.data, raw.data() + offset, r.size * sizeof(double));
      found = true;
      ++loaded;
      break;
    }
    if (!found) throw ParseError("unknown checkpoint tensor: " + name);
  }
  if (loaded != refs.size())
    throw ParseError("checkpoint is missing tensors");
  return params;
}

}  // namespace danse::io
