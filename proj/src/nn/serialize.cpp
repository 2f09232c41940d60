#include <istream>
#include <ostream>
#include <sstream>

#include "tidealloc/nn.hpp"

// Parameter file layout (v1), one token stream per line:
//   # tidealloc-params v1 manifest=<hash>
//   set <set_name> params=<count> steps=<optimizer steps>
//   param <name> <rows> <cols> <frozen 0|1>
//   value <rows*cols numbers, row-major>
//   moment1 <...>
//   moment2 <...>
//   end
// Numbers use the shortest round-trip decimal form.

namespace tidealloc::nn {
namespace {

constexpr std::string_view kMagic = "# tidealloc-params v";
constexpr int kParamsVersion = 1;

void write_row(std::ostream& out, std::string_view tag, const Tensor2& t) {
  out << tag;
  for (double v : t.data()) out << ' ' << format_double(v);
  out << '\n';
}

std::istringstream next_line(std::istream& in, std::string_view expected_tag) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("parameter file: unexpected end, wanted '" + std::string(expected_tag) + "'");
  }
  std::istringstream tokens(line);
  std::string tag;
  tokens >> tag;
  if (tag != expected_tag) {
    throw SchemaError("parameter file: expected '" + std::string(expected_tag) + "', found '" +
                      tag + "'");
  }
  return tokens;
}

void read_row(std::istream& in, std::string_view tag, Tensor2& t) {
  auto tokens = next_line(in, tag);
  std::string tok;
  for (double& v : t.data()) {
    if (!(tokens >> tok) || !parse_double(tok, v)) {
      throw SchemaError("parameter file: bad or missing number in '" + std::string(tag) + "'");
    }
  }
  if (tokens >> tok) throw SchemaError("parameter file: extra values in '" + std::string(tag) + "'");
}

std::string key_value(std::istringstream& tokens, std::string_view key) {
  std::string tok;
  tokens >> tok;
  const std::string prefix = std::string(key) + "=";
  if (tok.rfind(prefix, 0) != 0) throw SchemaError("parameter file: expected " + prefix);
  return tok.substr(prefix.size());
}

}  // namespace

void write_params_header(std::ostream& out, std::string_view manifest_hash) {
  out << kMagic << kParamsVersion << " manifest=" << manifest_hash << '\n';
}

std::string read_params_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) {
    throw VersionError("parameter file: missing versioned header");
  }
  std::istringstream rest(line.substr(kMagic.size()));
  int version = 0;
  rest >> version;
  if (version != kParamsVersion) {
    throw VersionError("parameter file: unsupported version " + std::to_string(version));
  }
  return key_value(rest, "manifest");
}

void write_parameters(std::ostream& out, std::string_view set_name, const ParameterSet& params) {
  out << "set " << set_name << " params=" << params.size()
      << " steps=" << params.optimizer_steps() << '\n';
  for (const auto& p : params) {
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << ' '
        << (p.frozen ? 1 : 0) << '\n';
    write_row(out, "value", p.value);
    write_row(out, "moment1", p.moment1);
    write_row(out, "moment2", p.moment2);
  }
  out << "end\n";
}

void read_parameters(std::istream& in, std::string_view set_name, ParameterSet& params) {
  auto header = next_line(in, "set");
  std::string name;
  header >> name;
  if (name != set_name) {
    throw SchemaError("parameter file: expected set '" + std::string(set_name) + "', found '" +
                      name + "'");
  }
  const std::size_t count = std::stoul(key_value(header, "params"));
  const std::uint64_t steps = std::stoull(key_value(header, "steps"));
  if (count != params.size()) {
    throw SchemaError("parameter file: set '" + name + "' has " + std::to_string(count) +
                      " parameters, network has " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto tokens = next_line(in, "param");
    std::string pname;
    std::size_t rows = 0;
    std::size_t cols = 0;
    int frozen = 0;
    tokens >> pname >> rows >> cols >> frozen;
    if (pname != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw SchemaError("parameter file: '" + pname + "' does not match network parameter '" +
                        p.name + "'");
    }
    read_row(in, "value", p.value);
    read_row(in, "moment1", p.moment1);
    read_row(in, "moment2", p.moment2);
    p.frozen = frozen != 0;
    p.grad.mat().setZero();
  }
  params.set_optimizer_steps(steps);
  next_line(in, "end");
}

}  // namespace tidealloc::nn
