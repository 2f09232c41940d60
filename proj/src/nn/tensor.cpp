#include <algorithm>

#include "tidealloc/nn.hpp"

namespace tidealloc::nn {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : m_(Matrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), fill)) {}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor2 t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Tensor2::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

void Tensor2::require_finite(std::string_view what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + std::string(what));
}

std::size_t ParameterSet::add(std::string name, Tensor2 init) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name " + name);
  Parameter p;
  p.grad = Tensor2(init.rows(), init.cols());
  p.moment1 = Tensor2(init.rows(), init.cols());
  p.moment2 = Tensor2(init.rows(), init.cols());
  p.value = std::move(init);
  p.name = std::move(name);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Parameter* ParameterSet::find(std::string_view name) {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->find(name);
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.mat().setZero();
}

void ParameterSet::set_frozen(bool frozen) {
  for (auto& p : params_) p.frozen = frozen;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name ||
        !params_[i].value.same_shape(other.params_[i].value)) {
      return false;
    }
  }
  return true;
}

}  // namespace tidealloc::nn
