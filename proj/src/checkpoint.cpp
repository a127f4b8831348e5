#include "cutgan/io/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace cutgan {

namespace {
constexpr char kMagic[8] = {'C', 'U', 'T', 'G', 'A', 'N', 'C', 'K'};
constexpr uint32_t kVersion = 1;
}  // namespace

void Checkpoint::add(const std::string& name, Tensor<float> t) {
  check(!index_.count(name), "checkpoint: duplicate tensor name " + name);
  index_[name] = tensors_.size();
  tensors_.emplace_back(name, std::move(t));
}

const Tensor<float>& Checkpoint::get(const std::string& name) const {
  auto it = index_.find(name);
  check(it != index_.end(), "checkpoint: missing tensor " + name);
  return tensors_[it->second].second;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header;
  header["meta"] = meta;
  nlohmann::json tindex = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    nlohmann::json e;
    e["name"] = name;
    e["dtype"] = "f32";
    e["shape"] = t.shape();
    e["offset"] = offset;
    offset += static_cast<uint64_t>(t.numel()) * sizeof(float);
    tindex.push_back(std::move(e));
  }
  header["tensors"] = std::move(tindex);
  std::string hs = header.dump();

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check(out.good(), "checkpoint: cannot open for writing: " + tmp);
    out.write(kMagic, 8);
    uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors_) {
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
    check(out.good(), "checkpoint: write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  check(!ec, "checkpoint: rename to " + path + " failed: " + ec.message());
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  check(in.good() && std::memcmp(magic, kMagic, 8) == 0,
        "checkpoint: " + path + " is not a checkpoint container (bad magic)");
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  check(ver == kVersion, "checkpoint: " + path + " has format version " + std::to_string(ver) +
                             ", this build reads version " + std::to_string(kVersion));
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  check(in.good(), "checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint ck;
  ck.meta = header.value("meta", nlohmann::json::object());
  for (const auto& e : header.at("tensors")) {
    std::string name = e.at("name");
    check(e.at("dtype") == "f32", "checkpoint: unsupported dtype for " + name);
    Shape shape = e.at("shape").get<Shape>();
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    check(in.good(), "checkpoint: truncated tensor data for " + name + " in " + path);
    ck.add(name, std::move(t));
  }
  return ck;
}

}  // namespace cutgan
