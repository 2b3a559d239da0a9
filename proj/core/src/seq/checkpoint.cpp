#include "phasecast/seq/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "phasecast/error.hpp"
#include "phasecast/text_format.hpp"

namespace phasecast::seq {

using diff::Tensor;

namespace {

void write_tensor(std::ostream& os, std::string_view name, const Tensor& t) {
  os << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (c) os << ' ';
      os << format_double(t(r, c));
    }
    os << '\n';
  }
}

std::size_t to_dim(const std::string& s, const char* what) {
  const long long v = parse_int(s, what);
  if (v < 0) throw ParseError(std::string(what) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.config;
  os << "phasecast-checkpoint " << kCheckpointVersion << '\n';
  os << "config n_phases " << c.n_phases << " hidden " << c.hidden << " feature_dim " << c.feature_dim
     << " noise_dim " << c.noise_dim << " t_past " << c.t_past << " t_future " << c.t_future << " gumbel_tau "
     << format_double(c.gumbel_tau) << '\n';
  if (ckpt.generator) ckpt.generator->visit([&](std::string_view n, const Tensor& t) { write_tensor(os, n, t); });
  if (ckpt.discriminator)
    ckpt.discriminator->visit([&](std::string_view n, const Tensor& t) { write_tensor(os, n, t); });
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "phasecast-checkpoint") {
    throw ParseError("checkpoint: missing 'phasecast-checkpoint' header");
  }
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  std::string word;
  if (!(is >> word) || word != "config") throw ParseError("checkpoint: expected config block");
  std::map<std::string, std::string> kv;
  for (int i = 0; i < 7; ++i) {
    std::string k, v;
    if (!(is >> k >> v)) throw ParseError("checkpoint: truncated config block");
    kv[k] = v;
  }
  auto need = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ParseError(std::string("checkpoint: config lacks ") + k);
    return it->second;
  };
  ModelConfig& c = ckpt.config;
  c.n_phases = to_dim(need("n_phases"), "n_phases");
  c.hidden = to_dim(need("hidden"), "hidden");
  c.feature_dim = to_dim(need("feature_dim"), "feature_dim");
  c.noise_dim = to_dim(need("noise_dim"), "noise_dim");
  c.t_past = to_dim(need("t_past"), "t_past");
  c.t_future = to_dim(need("t_future"), "t_future");
  c.gumbel_tau = parse_double(need("gumbel_tau"), "gumbel_tau");
  c.validate();

  std::map<std::string, Tensor> found;
  while (is >> word && word != "end") {
    if (word != "tensor") throw ParseError("checkpoint: unexpected token '" + word + "'");
    std::string name, rs, cs;
    if (!(is >> name >> rs >> cs)) throw ParseError("checkpoint: truncated tensor header");
    const std::size_t rows = to_dim(rs, "rows"), cols = to_dim(cs, "cols");
    Tensor t = Tensor::zeros(rows, cols);
    for (auto& v : t.values()) {
      std::string tok;
      if (!(is >> tok)) throw ParseError("checkpoint: tensor " + name + " is truncated");
      v = parse_double(tok, name);
    }
    if (!found.emplace(name, std::move(t)).second) throw ParseError("checkpoint: duplicate tensor " + name);
  }
  if (word != "end") throw ParseError("checkpoint: missing 'end' marker");

  auto take = [&](auto& params, const char* prefix) {
    bool any = false;
    for (const auto& [name, t] : found)
      if (name.rfind(prefix, 0) == 0) any = true;
    if (!any) return false;
    params.visit([&](std::string_view n, Tensor& dst) {
      auto it = found.find(std::string(n));
      if (it == found.end()) throw ParseError("checkpoint: missing tensor " + std::string(n));
      dst = std::move(it->second);
      found.erase(it);
    });
    params.validate(c);
    return true;
  };

  GeneratorParams g = GeneratorParams::zeros(c);
  if (take(g, "generator.")) ckpt.generator = std::move(g);
  DiscriminatorParams d = DiscriminatorParams::zeros(c);
  if (take(d, "discriminator.")) ckpt.discriminator = std::move(d);
  if (!found.empty()) throw ParseError("checkpoint: unknown tensor " + found.begin()->first);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(os, ckpt);
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace phasecast::seq
