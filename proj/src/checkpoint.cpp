#include "cpr/checkpoint.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cpr {
namespace {

void write_values(std::ostream& out, const char* tag, std::span<const double> values) {
  out << tag << ' ' << values.size();
  for (double v : values) out << ' ' << v;
  out << '\n';
}

void expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw ValidationError("checkpoint: expected '" + token + "', got '" + got + "'");
  }
}

template <typename T>
T read(std::istream& in, const char* what) {
  T value{};
  if (!(in >> value)) throw ValidationError(std::string("checkpoint: unreadable ") + what);
  return value;
}

std::vector<double> read_values(std::istream& in, const std::string& tag) {
  expect(in, tag);
  const auto n = read<std::size_t>(in, "value count");
  std::vector<double> values(n);
  for (double& v : values) {
    // strtod rather than operator>> so subnormals round-trip.
    const auto token = read<std::string>(in, "value");
    char* end = nullptr;
    v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) throw ValidationError("checkpoint: bad value '" + token + "'");
  }
  return values;
}

void write_encoder(std::ostream& out, const std::string& role, const ToyEncoder& enc) {
  out << "encoder " << role << ' ' << enc.input_dim() << ' ' << enc.output_dim() << '\n';
  write_values(out, "w", enc.weights());
  write_values(out, "b", enc.bias());
}

ToyEncoder read_encoder(std::istream& in, const std::string& role) {
  expect(in, "encoder");
  expect(in, role);
  const auto in_dim = read<std::size_t>(in, "input dim");
  const auto out_dim = read<std::size_t>(in, "output dim");
  ToyEncoder enc(in_dim, out_dim);
  auto w = read_values(in, "w");
  auto b = read_values(in, "b");
  if (w.size() != in_dim * out_dim || b.size() != out_dim) throw ValidationError("checkpoint: encoder shape mismatch");
  enc.weights() = std::move(w);
  enc.bias() = std::move(b);
  if (!enc.finite()) throw ValidationError("checkpoint: non-finite encoder parameters");
  return enc;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainerState& state) {
  if (!state.bank) throw std::logic_error("checkpoint: trainer state has no bank");
  const auto old_precision = out.precision(17);
  const MemoryBank& bank = *state.bank;
  out << "cpr-checkpoint " << kCheckpointVersion << '\n';
  out << "seed " << state.seed << '\n';
  out << "position " << state.cycle << ' ' << state.epoch_in_cycle << ' ' << state.epoch << ' '
      << (state.bank_ready ? 1 : 0) << '\n';
  out << "rng " << state.rng_state << '\n';
  out << "views " << bank.views().size();
  for (const auto& v : bank.views()) out << ' ' << v;
  out << '\n';
  for (const auto& v : bank.views()) {
    const EncoderSet& enc = state.encoders.at(v);
    out << "view " << v << '\n';
    write_encoder(out, "live", enc.live);
    write_encoder(out, "ema", enc.ema);
    write_encoder(out, "frozen", enc.frozen);
  }
  out << "bank " << bank.capacity() << ' ' << bank.size() << ' ' << bank.cursor() << '\n';
  for (const auto& v : bank.views()) {
    out << "bank_view " << v << ' ' << bank.dim(v) << '\n';
    std::vector<double> flat;
    for (Slot t = 0; t < bank.size(); ++t) {
      const auto f = bank.feature(v, t);
      flat.insert(flat.end(), f.begin(), f.end());
    }
    write_values(out, "slots", flat);
  }
  out << "slot_ids " << bank.size();
  for (Slot t = 0; t < bank.size(); ++t) out << ' ' << bank.slot_id(t);
  out << "\nend\n";
  out.precision(old_precision);
}

TrainerState read_checkpoint(std::istream& in) {
  expect(in, "cpr-checkpoint");
  const int version = read<int>(in, "version");
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  TrainerState state;
  expect(in, "seed");
  state.seed = read<std::uint64_t>(in, "seed");
  expect(in, "position");
  state.cycle = read<int>(in, "cycle");
  state.epoch_in_cycle = read<int>(in, "epoch in cycle");
  state.epoch = read<int>(in, "epoch");
  state.bank_ready = read<int>(in, "bank flag") != 0;
  expect(in, "rng");
  std::getline(in >> std::ws, state.rng_state);

  expect(in, "views");
  const auto num_views = read<std::size_t>(in, "view count");
  std::vector<ViewId> views(num_views);
  for (auto& v : views) v = read<std::string>(in, "view name");
  for (const auto& v : views) {
    expect(in, "view");
    expect(in, v);
    EncoderSet enc;
    enc.live = read_encoder(in, "live");
    enc.ema = read_encoder(in, "ema");
    enc.frozen = read_encoder(in, "frozen");
    state.encoders.emplace(v, std::move(enc));
  }

  expect(in, "bank");
  const auto capacity = read<std::size_t>(in, "capacity");
  const auto size = read<std::size_t>(in, "size");
  const auto cursor = read<std::size_t>(in, "cursor");
  std::vector<MemoryBank::ViewShape> shapes;
  std::map<ViewId, std::vector<double>> storage;
  for (const auto& v : views) {
    expect(in, "bank_view");
    expect(in, v);
    const auto dim = read<std::size_t>(in, "bank dim");
    auto flat = read_values(in, "slots");
    if (flat.size() != size * dim) throw ValidationError("checkpoint: bank slot count mismatch");
    flat.resize(capacity * dim, 0.0);
    shapes.push_back({v, dim});
    storage.emplace(v, std::move(flat));
  }
  expect(in, "slot_ids");
  if (read<std::size_t>(in, "slot id count") != size) throw ValidationError("checkpoint: slot id count mismatch");
  std::vector<InstanceId> ids(capacity);
  for (std::size_t t = 0; t < size; ++t) ids[t] = read<std::string>(in, "slot id");
  expect(in, "end");

  state.bank.emplace(capacity, std::move(shapes));
  state.bank->restore(cursor, size, std::move(ids), std::move(storage));
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  write_checkpoint(out, state);
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

}  // namespace cpr
