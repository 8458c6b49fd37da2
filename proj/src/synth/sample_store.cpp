#include "dehaze/synth/sample_store.hpp"

#include <cstdio>
#include <fstream>

#include "dehaze/config.hpp"
#include "dehaze/errors.hpp"

namespace dhz::synth {
namespace {

template <typename R>
nn::TensorRecord to_record(const std::string& name, const R& r) {
  nn::TensorRecord rec;
  rec.name = name;
  rec.dims = {static_cast<std::uint32_t>(r.height()), static_cast<std::uint32_t>(r.width()),
              static_cast<std::uint32_t>(R::kChannels)};
  rec.data.assign(r.values().begin(), r.values().end());
  return rec;
}

template <typename R>
R from_record(const std::vector<nn::TensorRecord>& records, const std::string& name) {
  const auto& rec = nn::find_record(records, name);
  if (rec.dims.size() != 3 || rec.dims[2] != static_cast<std::uint32_t>(R::kChannels) || rec.dims[0] == 0 ||
      rec.dims[1] == 0) {
    throw IoError("record '" + name + "' has unexpected dims");
  }
  R r(static_cast<int>(rec.dims[0]), static_cast<int>(rec.dims[1]));
  std::copy(rec.data.begin(), rec.data.end(), r.values().begin());
  return r;
}

}  // namespace

std::vector<nn::TensorRecord> sample_to_records(const net::TrainSample& s) {
  return {to_record("hazy", s.hazy), to_record("clean", s.clean), to_record("t", s.t), to_record("a", s.a)};
}

net::TrainSample sample_from_records(const std::vector<nn::TensorRecord>& records) {
  net::TrainSample s{from_record<Image>(records, "hazy"), from_record<Image>(records, "clean"),
                     from_record<ScalarMap>(records, "t"), from_record<ColorMap>(records, "a")};
  net::validate_sample(s);
  return s;
}

SampleWriter::SampleWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_ / "samples");
}

void SampleWriter::write(const net::TrainSample& sample) {
  char id[32];
  std::snprintf(id, sizeof id, "%06zu", count_);
  nn::write_container(dir_ / "samples" / (std::string(id) + ".dhzw"), sample_to_records(sample));
  ids_.emplace_back(id);
  ++count_;
}

void SampleWriter::finish() {
  std::ofstream out(dir_ / "index.csv");
  if (!out) throw IoError("cannot write index in " + dir_.string());
  out << "id,file\n";
  for (const auto& id : ids_) out << id << ",samples/" << id << ".dhzw\n";
  if (!out) throw IoError("failed writing index in " + dir_.string());
}

std::vector<net::TrainSample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.csv");
  if (!in) throw IoError("no dataset index at " + (dir / "index.csv").string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,file") throw IoError("dataset index must start with 'id,file'");
  std::vector<net::TrainSample> out;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos) throw IoError("malformed dataset index row: " + t);
    out.push_back(sample_from_records(nn::read_container(dir / t.substr(comma + 1))));
  }
  return out;
}

}  // namespace dhz::synth
