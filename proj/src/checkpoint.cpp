#include "varcpo/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace varcpo {

namespace {

constexpr const char* kMagic = "varcpo-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_array(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << format_double(data[i]);
  }
  out << '\n';
}

/// Splits a flat network parameter vector into one array per weight matrix
/// and bias.
std::vector<std::pair<Eigen::Index, Eigen::Index>> network_arrays(const Architecture& arch) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  const auto sizes = arch.layer_sizes();
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Eigen::Index w = static_cast<Eigen::Index>(sizes[l]) * sizes[l + 1];
    spans.emplace_back(offset, w);
    spans.emplace_back(offset + w, sizes[l + 1]);
    offset += w + sizes[l + 1];
  }
  return spans;
}

void write_header(std::ostream& out, HeadKind kind, const Architecture& arch) {
  out << "head " << to_string(kind) << '\n';
  out << "architecture " << arch.input_dim;
  for (int h : arch.hidden) out << ' ' << h;
  out << ' ' << arch.output_dim << ' ' << arch.activation << '\n';
}

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointError(std::string("truncated checkpoint: expected ") + what);
  return line;
}

std::istringstream expect(std::istream& in, const std::string& key) {
  const std::string line = next_line(in, key.c_str());
  std::istringstream ss(line);
  std::string word;
  ss >> word;
  if (word != key) throw CheckpointError("malformed checkpoint: expected '" + key + "', got '" + line + "'");
  return ss;
}

Vector read_array(std::istream& in, Eigen::Index expected) {
  std::istringstream ss(next_line(in, "parameter array"));
  Vector v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    std::string tok;
    if (!(ss >> tok)) throw CheckpointError("parameter array shorter than architecture requires");
    try {
      v[i] = std::stod(tok);
    } catch (const std::exception&) {
      throw CheckpointError("bad number '" + tok + "' in checkpoint");
    }
  }
  std::string extra;
  if (ss >> extra) throw CheckpointError("parameter array longer than architecture requires");
  return v;
}

Architecture read_architecture(std::istream& in) {
  auto ss = expect(in, "architecture");
  std::vector<std::string> tokens;
  for (std::string t; ss >> t;) tokens.push_back(t);
  if (tokens.size() < 3) throw CheckpointError("architecture line too short");
  Architecture arch;
  arch.activation = tokens.back();
  try {
    arch.input_dim = std::stoi(tokens.front());
    arch.output_dim = std::stoi(tokens[tokens.size() - 2]);
    arch.hidden.clear();
    for (std::size_t i = 1; i + 2 < tokens.size(); ++i) arch.hidden.push_back(std::stoi(tokens[i]));
  } catch (const std::exception&) {
    throw CheckpointError("non-integer layer size in architecture line");
  }
  return arch;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "heads " << ckpt.policies.size() + ckpt.values.size() << '\n';
  for (const auto& p : ckpt.policies) {
    write_header(out, p.kind(), p.architecture());
    out << "log_std_range " << format_double(p.log_std_min()) << ' ' << format_double(p.log_std_max()) << '\n';
    const auto spans = network_arrays(p.architecture());
    const bool gaussian = p.kind() == HeadKind::GaussianPolicy;
    out << "arrays " << spans.size() + (gaussian ? 1 : 0) << '\n';
    for (auto [off, n] : spans) write_array(out, p.parameters().data() + off, n);
    if (gaussian) {
      const auto d = p.architecture().output_dim;
      write_array(out, p.parameters().data() + p.parameter_count() - d, d);
    }
  }
  for (const auto& v : ckpt.values) {
    write_header(out, HeadKind::ValueHead, v.architecture());
    out << "output_scale " << format_double(v.output_scale()) << '\n';
    const auto spans = network_arrays(v.architecture());
    out << "arrays " << spans.size() << '\n';
    for (auto [off, n] : spans) write_array(out, v.parameters().data() + off, n);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  {
    auto ss = expect(in, kMagic);
    int version = 0;
    if (!(ss >> version) || version != kVersion)
      throw CheckpointError("unsupported checkpoint version");
  }
  std::size_t heads = 0;
  if (!(expect(in, "heads") >> heads)) throw CheckpointError("malformed heads line");

  Checkpoint ckpt;
  for (std::size_t h = 0; h < heads; ++h) {
    std::string kind_text;
    expect(in, "head") >> kind_text;
    HeadKind kind;
    try {
      kind = parse_head_kind(kind_text);
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(e.what());
    }
    const Architecture arch = read_architecture(in);
    const auto spans = network_arrays(arch);
    if (kind == HeadKind::ValueHead) {
      double scale = 1.0;
      expect(in, "output_scale") >> scale;
      std::size_t arrays = 0;
      expect(in, "arrays") >> arrays;
      if (arrays != spans.size()) throw CheckpointError("value head array count does not match architecture");
      ValueHead v(arch, scale);
      Vector params(v.parameter_count());
      for (auto [off, n] : spans) params.segment(off, n) = read_array(in, n);
      v.set_parameters(params);
      ckpt.values.push_back(std::move(v));
    } else {
      double lo = -5.0, hi = 1.0;
      expect(in, "log_std_range") >> lo >> hi;
      const bool gaussian = kind == HeadKind::GaussianPolicy;
      std::size_t arrays = 0;
      expect(in, "arrays") >> arrays;
      if (arrays != spans.size() + (gaussian ? 1 : 0))
        throw CheckpointError("policy array count does not match architecture");
      Policy p(kind, arch, lo, hi);
      Vector params(p.parameter_count());
      for (auto [off, n] : spans) params.segment(off, n) = read_array(in, n);
      if (gaussian) params.tail(arch.output_dim) = read_array(in, arch.output_dim);
      p.set_parameters(params);
      ckpt.policies.push_back(std::move(p));
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace varcpo
