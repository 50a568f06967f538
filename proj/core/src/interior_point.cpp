#include "h2blend/interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "h2blend/errors.hpp"
#include "h2blend/sparse_ldl.hpp"

namespace h2blend {

namespace {

constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kGammaAlpha = 0.05;
constexpr double kEtaPhi = 1e-8;
constexpr double kSTheta = 1.1;
constexpr double kSPhi = 2.3;
constexpr double kDeltaSwitch = 1.0;
constexpr double kKappaSigma = 1e10;
constexpr double kKappaSoc = 0.99;
constexpr double kKappaD = 1e-5;
constexpr double kLambdaMax = 1e3;
constexpr double kEps = std::numeric_limits<double>::epsilon();

std::size_t at(int i) { return static_cast<std::size_t>(i); }

double inf_norm(const std::vector<double>& v) {
  double r = 0.0;
  for (double a : v) r = std::max(r, std::abs(a));
  return r;
}

double one_norm(const std::vector<double>& v) {
  double r = 0.0;
  for (double a : v) r += std::abs(a);
  return r;
}

// One KKT entry and where its value comes from.
enum class Source : unsigned char { hessian, jacobian, slack_jacobian, primal_diag, dual_diag };

struct Entry {
  int row;
  int col;
  Source source;
  int ref;  // slot in the Hessian/Jacobian values, or a diagonal index
};

struct Filter {
  double theta_max = kInf;
  std::vector<std::pair<double, double>> entries;  // (theta, phi)

  bool acceptable(double theta, double phi) const {
    if (theta > theta_max) return false;
    for (const auto& [t, p] : entries) {
      if (theta >= t && phi >= p) return false;
    }
    return true;
  }
  void add(double theta, double phi) {
    std::erase_if(entries, [&](const auto& e) { return e.first >= theta && e.second >= phi; });
    entries.emplace_back(theta, phi);
  }
  void reset() { entries.clear(); }
};

class InteriorPoint {
 public:
  InteriorPoint(const NlpInterface& nlp, const IpmOptions& opt) : nlp_(nlp), opt_(opt) {}

  IpmResult run(const IpmPoint& start, bool warm);

 private:
  void setup();
  void build_kkt_pattern();

  bool evaluate_point(const std::vector<double>& w, double& f, std::vector<double>& c) const;
  void evaluate_derivatives();
  double barrier(const std::vector<double>& w, double f) const;
  void barrier_gradient(std::vector<double>& g) const;
  void lagrangian_gradient(std::vector<double>& g) const;

  void compute_sigma(std::vector<double>& sigma) const;
  void fill_kkt(const std::vector<double>& primal_diag, bool with_hessian, double delta_w,
                double delta_c);
  bool factor_with_inertia(const std::vector<double>& sigma, double& delta_w);
  void multiply(const std::vector<double>& v, std::vector<double>& out) const;
  void solve_refined(std::vector<double>& rhs, double delta_c_used) const;
  double delta_c_now_ = 0.0;  // dual regularization of the current factorization

  void init_multipliers();
  double optimality_error(double mu, double& dual_inf, double& compl_inf) const;
  double frac_to_boundary(const std::vector<double>& dw, double tau) const;
  double frac_to_boundary_z(const std::vector<double>& dzl, const std::vector<double>& dzu,
                            double tau) const;
  void push_into_bounds(std::vector<double>& w, double push, double frac) const;
  void safeguard_z();
  bool restoration(Filter& filter);

  const NlpInterface& nlp_;
  const IpmOptions& opt_;

  int n_ = 0;   // original variables
  int m_ = 0;   // rows
  int mi_ = 0;  // inequality rows
  int nw_ = 0;  // n + mi
  std::vector<int> ineq_rows_;
  std::vector<int> slack_of_row_;  // -1 for equalities
  std::vector<double> target_;     // equality right-hand side
  std::vector<double> wl_, wu_;    // relaxed bounds on w
  std::vector<double> orig_l_, orig_u_;
  std::vector<char> has_l_, has_u_, fixed_;

  std::vector<Entry> entries_;
  std::vector<int> col_ptr_;
  std::vector<int> row_idx_;
  std::vector<int> entry_of_pos_;
  std::vector<double> kkt_values_;
  SparseLdl ldl_;
  std::vector<int> jac_col_;
  std::vector<int> hess_row_;
  std::vector<int> hess_col_;

  double mu_ = 0.1;
  std::vector<double> w_, y_, zl_, zu_;
  double f_ = 0.0;
  std::vector<double> c_;
  std::vector<double> grad_f_;
  std::vector<double> jac_;
  std::vector<double> hess_;
  double delta_w_last_ = 0.0;
};

void InteriorPoint::setup() {
  n_ = nlp_.num_variables();
  m_ = nlp_.num_rows();
  const auto rl = nlp_.row_lower();
  const auto ru = nlp_.row_upper();
  slack_of_row_.assign(at(m_), -1);
  target_.assign(at(m_), 0.0);
  ineq_rows_.clear();
  for (int i = 0; i < m_; ++i) {
    if (rl[at(i)] == ru[at(i)]) {
      target_[at(i)] = rl[at(i)];
    } else {
      slack_of_row_[at(i)] = static_cast<int>(ineq_rows_.size());
      ineq_rows_.push_back(i);
    }
  }
  mi_ = static_cast<int>(ineq_rows_.size());
  nw_ = n_ + mi_;
  orig_l_.resize(at(nw_));
  orig_u_.resize(at(nw_));
  const auto xl = nlp_.var_lower();
  const auto xu = nlp_.var_upper();
  for (int j = 0; j < n_; ++j) {
    orig_l_[at(j)] = xl[at(j)];
    orig_u_[at(j)] = xu[at(j)];
  }
  for (int k = 0; k < mi_; ++k) {
    const auto r = at(ineq_rows_[at(k)]);
    orig_l_[at(n_ + k)] = rl[r];
    orig_u_[at(n_ + k)] = ru[r];
  }
  wl_ = orig_l_;
  wu_ = orig_u_;
  has_l_.assign(at(nw_), 0);
  has_u_.assign(at(nw_), 0);
  fixed_.assign(at(nw_), 0);
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (orig_l_[ks] == orig_u_[ks]) {
      fixed_[ks] = 1;
      continue;
    }
    if (std::isfinite(orig_l_[ks])) {
      has_l_[ks] = 1;
      wl_[ks] -= opt_.bound_relax * std::max(1.0, std::abs(orig_l_[ks]));
    }
    if (std::isfinite(orig_u_[ks])) {
      has_u_[ks] = 1;
      wu_[ks] += opt_.bound_relax * std::max(1.0, std::abs(orig_u_[ks]));
    }
  }
  c_.assign(at(m_), 0.0);
  grad_f_.assign(at(n_), 0.0);
  jac_.assign(nlp_.jacobian_pattern().nnz(), 0.0);
  hess_.assign(nlp_.hessian_pattern().nnz(), 0.0);
}

void InteriorPoint::build_kkt_pattern() {
  const SparsePattern& jp = nlp_.jacobian_pattern();
  const SparsePattern& hp = nlp_.hessian_pattern();
  entries_.clear();
  jac_col_.assign(jp.nnz(), 0);
  hess_row_.assign(hp.nnz(), 0);
  hess_col_.assign(hp.nnz(), 0);
  for (int r = 0; r < hp.rows; ++r) {
    for (int k = hp.row_ptr[at(r)]; k < hp.row_ptr[at(r) + 1]; ++k) {
      const int c = hp.col[at(k)];
      hess_row_[at(k)] = r;
      hess_col_[at(k)] = c;
      entries_.push_back({r, c, Source::hessian, k});
    }
  }
  for (int k = 0; k < nw_; ++k) entries_.push_back({k, k, Source::primal_diag, k});
  for (int i = 0; i < m_; ++i) {
    for (int k = jp.row_ptr[at(i)]; k < jp.row_ptr[at(i) + 1]; ++k) {
      const int j = jp.col[at(k)];
      jac_col_[at(k)] = j;
      entries_.push_back({nw_ + i, j, Source::jacobian, k});
    }
    const int s = slack_of_row_[at(i)];
    if (s >= 0) entries_.push_back({nw_ + i, n_ + s, Source::slack_jacobian, s});
    entries_.push_back({nw_ + i, nw_ + i, Source::dual_diag, i});
  }
  const int dim = nw_ + m_;
  col_ptr_.assign(at(dim) + 1, 0);
  for (const Entry& e : entries_) ++col_ptr_[at(e.col) + 1];
  for (int j = 0; j < dim; ++j) col_ptr_[at(j) + 1] += col_ptr_[at(j)];
  std::vector<int> next(col_ptr_.begin(), col_ptr_.end() - 1);
  row_idx_.assign(entries_.size(), 0);
  entry_of_pos_.assign(entries_.size(), 0);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    const int pos = next[at(entries_[e].col)]++;
    row_idx_[at(pos)] = entries_[e].row;
    entry_of_pos_[at(pos)] = static_cast<int>(e);
  }
  kkt_values_.assign(entries_.size(), 0.0);
  ldl_.analyze(dim, col_ptr_, row_idx_);
}

bool InteriorPoint::evaluate_point(const std::vector<double>& w, double& f,
                                   std::vector<double>& c) const {
  std::span<const double> x(w.data(), at(n_));
  try {
    f = nlp_.objective(x);
    nlp_.rows(x, c);
  } catch (const EvaluationError&) {
    return false;
  }
  if (!std::isfinite(f)) return false;
  for (int i = 0; i < m_; ++i) {
    const int s = slack_of_row_[at(i)];
    c[at(i)] -= s >= 0 ? w[at(n_ + s)] : target_[at(i)];
    if (!std::isfinite(c[at(i)])) return false;
  }
  return true;
}

void InteriorPoint::evaluate_derivatives() {
  std::span<const double> x(w_.data(), at(n_));
  nlp_.objective_gradient(x, grad_f_);
  nlp_.jacobian_values(x, jac_);
  nlp_.hessian_values(x, 1.0, y_, hess_);
}

double InteriorPoint::barrier(const std::vector<double>& w, double f) const {
  double phi = f;
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (has_l_[ks]) {
      phi -= mu_ * std::log(w[ks] - wl_[ks]);
      if (!has_u_[ks]) phi += kKappaD * mu_ * (w[ks] - wl_[ks]);
    }
    if (has_u_[ks]) {
      phi -= mu_ * std::log(wu_[ks] - w[ks]);
      if (!has_l_[ks]) phi += kKappaD * mu_ * (wu_[ks] - w[ks]);
    }
  }
  return phi;
}

// Gradient of the Lagrangian f + y^T c with respect to w (zero on fixed entries).
void InteriorPoint::lagrangian_gradient(std::vector<double>& g) const {
  g.assign(at(nw_), 0.0);
  for (int j = 0; j < n_; ++j) g[at(j)] = grad_f_[at(j)];
  const SparsePattern& jp = nlp_.jacobian_pattern();
  for (int i = 0; i < m_; ++i) {
    const double yi = y_[at(i)];
    for (int k = jp.row_ptr[at(i)]; k < jp.row_ptr[at(i) + 1]; ++k) {
      g[at(jac_col_[at(k)])] += jac_[at(k)] * yi;
    }
    const int s = slack_of_row_[at(i)];
    if (s >= 0) g[at(n_ + s)] -= yi;
  }
  for (int k = 0; k < nw_; ++k) {
    if (fixed_[at(k)]) g[at(k)] = 0.0;
  }
}

// Gradient of the barrier function (without the constraint term).
void InteriorPoint::barrier_gradient(std::vector<double>& g) const {
  g.assign(at(nw_), 0.0);
  for (int j = 0; j < n_; ++j) g[at(j)] = grad_f_[at(j)];
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (fixed_[ks]) {
      g[ks] = 0.0;
      continue;
    }
    if (has_l_[ks]) {
      g[ks] -= mu_ / (w_[ks] - wl_[ks]);
      if (!has_u_[ks]) g[ks] += kKappaD * mu_;
    }
    if (has_u_[ks]) {
      g[ks] += mu_ / (wu_[ks] - w_[ks]);
      if (!has_l_[ks]) g[ks] -= kKappaD * mu_;
    }
  }
}

void InteriorPoint::compute_sigma(std::vector<double>& sigma) const {
  sigma.assign(at(nw_), 0.0);
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (has_l_[ks]) sigma[ks] += zl_[ks] / (w_[ks] - wl_[ks]);
    if (has_u_[ks]) sigma[ks] += zu_[ks] / (wu_[ks] - w_[ks]);
  }
}

void InteriorPoint::fill_kkt(const std::vector<double>& primal_diag, bool with_hessian,
                             double delta_w, double delta_c) {
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    const Entry& en = entries_[e];
    double v = 0.0;
    switch (en.source) {
      case Source::hessian: {
        const int r = hess_row_[at(en.ref)];
        const int c = hess_col_[at(en.ref)];
        if (with_hessian && !fixed_[at(r)] && !fixed_[at(c)]) v = hess_[at(en.ref)];
        break;
      }
      case Source::jacobian:
        if (!fixed_[at(jac_col_[at(en.ref)])]) v = jac_[at(en.ref)];
        break;
      case Source::slack_jacobian:
        v = -1.0;
        break;
      case Source::primal_diag:
        v = fixed_[at(en.ref)] ? 1.0 : primal_diag[at(en.ref)] + delta_w;
        break;
      case Source::dual_diag:
        v = -delta_c;
        break;
    }
    kkt_values_[e] = v;
  }
}

bool InteriorPoint::factor_with_inertia(const std::vector<double>& sigma, double& delta_w) {
  std::vector<double> values(kkt_values_.size());
  auto attempt = [&](double dw, double dc) {
    fill_kkt(sigma, true, dw, dc);
    for (std::size_t p = 0; p < values.size(); ++p) {
      values[p] = kkt_values_[at(entry_of_pos_[p])];
    }
    delta_c_now_ = dc;
    return ldl_.factor(values) && ldl_.positive_pivots() == nw_ && ldl_.negative_pivots() == m_;
  };
  // Unregularized first; a rank deficient Jacobian shows up as wrong inertia.
  if (attempt(0.0, 0.0) || attempt(0.0, opt_.delta_c)) {
    delta_w = 0.0;
    return true;
  }
  const auto attempt_reg = [&](double dw) { return attempt(dw, opt_.delta_c); };
  double dw = delta_w_last_ == 0.0 ? opt_.delta_w_init
                                   : std::max(opt_.delta_w_min, delta_w_last_ / 3.0);
  const double grow = delta_w_last_ == 0.0 ? 100.0 : 8.0;
  while (dw <= 1e40) {
    if (attempt_reg(dw)) {
      delta_w_last_ = dw;
      delta_w = dw;
      return true;
    }
    dw *= grow;
  }
  return false;
}

void InteriorPoint::multiply(const std::vector<double>& v, std::vector<double>& out) const {
  out.assign(v.size(), 0.0);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    const Entry& en = entries_[e];
    const double a = kkt_values_[e];
    out[at(en.row)] += a * v[at(en.col)];
    if (en.row != en.col) out[at(en.col)] += a * v[at(en.row)];
  }
}

// Solves the regularized system and refines toward the unregularized one
// (dual block without delta_c).
void InteriorPoint::solve_refined(std::vector<double>& rhs, double delta_c_used) const {
  const std::vector<double> b = rhs;
  ldl_.solve(rhs);
  std::vector<double> kd;
  std::vector<double> r(b.size());
  double best = kInf;
  std::vector<double> best_x = rhs;
  for (int it = 0; it <= opt_.refinement_steps; ++it) {
    multiply(rhs, kd);
    for (int i = 0; i < m_; ++i) kd[at(nw_ + i)] += delta_c_used * rhs[at(nw_ + i)];
    double norm = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) {
      r[k] = b[k] - kd[k];
      norm = std::max(norm, std::abs(r[k]));
    }
    if (norm < best) {
      best = norm;
      best_x = rhs;
    }
    if (it == opt_.refinement_steps || norm <= 1e-14 * (1.0 + inf_norm(b))) break;
    ldl_.solve(r);
    for (std::size_t k = 0; k < b.size(); ++k) rhs[k] += r[k];
  }
  rhs = best_x;
}

void InteriorPoint::init_multipliers() {
  y_.assign(at(m_), 0.0);
  if (m_ == 0) return;
  std::vector<double> ones(at(nw_), 1.0);
  fill_kkt(ones, false, 0.0, 0.0);
  std::vector<double> values(kkt_values_.size());
  for (std::size_t p = 0; p < values.size(); ++p) values[p] = kkt_values_[at(entry_of_pos_[p])];
  // A small dual regularization keeps rank-deficient Jacobians factorable.
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    if (entries_[e].source == Source::dual_diag) kkt_values_[e] = -1e-10;
  }
  for (std::size_t p = 0; p < values.size(); ++p) values[p] = kkt_values_[at(entry_of_pos_[p])];
  if (!ldl_.factor(values)) return;
  std::vector<double> rhs(at(nw_ + m_), 0.0);
  for (int k = 0; k < nw_; ++k) {
    if (fixed_[at(k)]) continue;
    const double g = k < n_ ? grad_f_[at(k)] : 0.0;
    rhs[at(k)] = -(g - zl_[at(k)] + zu_[at(k)]);
  }
  solve_refined(rhs, 1e-10);
  std::vector<double> y(rhs.begin() + nw_, rhs.end());
  if (inf_norm(y) <= kLambdaMax) y_ = std::move(y);
}

double InteriorPoint::optimality_error(double mu, double& dual_inf, double& compl_inf) const {
  std::vector<double> g;
  lagrangian_gradient(g);
  double zsum = 0.0;
  dual_inf = 0.0;
  compl_inf = 0.0;
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (fixed_[ks]) continue;
    dual_inf = std::max(dual_inf, std::abs(g[ks] - zl_[ks] + zu_[ks]));
    zsum += zl_[ks] + zu_[ks];
    if (has_l_[ks]) compl_inf = std::max(compl_inf, std::abs((w_[ks] - wl_[ks]) * zl_[ks] - mu));
    if (has_u_[ks]) compl_inf = std::max(compl_inf, std::abs((wu_[ks] - w_[ks]) * zu_[ks] - mu));
  }
  const double nz = std::max(1.0, 2.0 * nw_);
  const double s_d = std::max(opt_.s_max, (one_norm(y_) + zsum) / (m_ + nz)) / opt_.s_max;
  const double s_c = std::max(opt_.s_max, zsum / nz) / opt_.s_max;
  dual_inf /= s_d;
  compl_inf /= s_c;
  return std::max({dual_inf, inf_norm(c_), compl_inf});
}

double InteriorPoint::frac_to_boundary(const std::vector<double>& dw, double tau) const {
  double alpha = 1.0;
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (has_l_[ks] && dw[ks] < 0.0) {
      alpha = std::min(alpha, -tau * (w_[ks] - wl_[ks]) / dw[ks]);
    }
    if (has_u_[ks] && dw[ks] > 0.0) {
      alpha = std::min(alpha, tau * (wu_[ks] - w_[ks]) / dw[ks]);
    }
  }
  return alpha;
}

double InteriorPoint::frac_to_boundary_z(const std::vector<double>& dzl,
                                         const std::vector<double>& dzu, double tau) const {
  double alpha = 1.0;
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (has_l_[ks] && dzl[ks] < 0.0) alpha = std::min(alpha, -tau * zl_[ks] / dzl[ks]);
    if (has_u_[ks] && dzu[ks] < 0.0) alpha = std::min(alpha, -tau * zu_[ks] / dzu[ks]);
  }
  return alpha;
}

void InteriorPoint::push_into_bounds(std::vector<double>& w, double push, double frac) const {
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (fixed_[ks]) {
      w[ks] = orig_l_[ks];
      continue;
    }
    const double l = wl_[ks];
    const double u = wu_[ks];
    double pl = has_l_[ks] ? push * std::max(1.0, std::abs(l)) : 0.0;
    double pu = has_u_[ks] ? push * std::max(1.0, std::abs(u)) : 0.0;
    if (has_l_[ks] && has_u_[ks]) {
      pl = std::min(pl, frac * (u - l));
      pu = std::min(pu, frac * (u - l));
    }
    if (has_l_[ks]) w[ks] = std::max(w[ks], l + pl);
    if (has_u_[ks]) w[ks] = std::min(w[ks], u - pu);
  }
}

void InteriorPoint::safeguard_z() {
  for (int k = 0; k < nw_; ++k) {
    const auto ks = at(k);
    if (has_l_[ks]) {
      const double gap = w_[ks] - wl_[ks];
      zl_[ks] = std::clamp(zl_[ks], mu_ / (kKappaSigma * gap), kKappaSigma * mu_ / gap);
    }
    if (has_u_[ks]) {
      const double gap = wu_[ks] - w_[ks];
      zu_[ks] = std::clamp(zu_[ks], mu_ / (kKappaSigma * gap), kKappaSigma * mu_ / gap);
    }
  }
}

// Minimum-norm Gauss-Newton steps on ||c||, in the barrier metric, until the
// filter accepts the point. Returns false when no progress is possible.
bool InteriorPoint::restoration(Filter& filter) {
  const double theta0 = one_norm(c_);
  filter.add((1.0 - kGammaTheta) * theta0, barrier(w_, f_) - kGammaPhi * theta0);
  std::vector<double> sigma;
  std::vector<double> values(kkt_values_.size());
  std::vector<double> wt(at(nw_));
  std::vector<double> ct(at(m_));
  const double tau = std::max(opt_.tau_min, 1.0 - mu_);
  for (int it = 0; it < opt_.max_restoration_iter; ++it) {
    compute_sigma(sigma);
    const double prox = std::max(std::sqrt(mu_), 1e-6);
    fill_kkt(sigma, false, prox, opt_.delta_c);
    for (std::size_t p = 0; p < values.size(); ++p) values[p] = kkt_values_[at(entry_of_pos_[p])];
    if (!ldl_.factor(values)) return false;
    std::vector<double> rhs(at(nw_ + m_), 0.0);
    for (int i = 0; i < m_; ++i) rhs[at(nw_ + i)] = -c_[at(i)];
    solve_refined(rhs, opt_.delta_c);
    std::vector<double> dw(rhs.begin(), rhs.begin() + nw_);
    const double theta = one_norm(c_);
    double alpha = frac_to_boundary(dw, tau);
    bool moved = false;
    double ft = 0.0;
    while (alpha > 1e-12) {
      for (int k = 0; k < nw_; ++k) wt[at(k)] = w_[at(k)] + alpha * dw[at(k)];
      if (evaluate_point(wt, ft, ct) && one_norm(ct) <= (1.0 - 1e-4 * alpha) * theta) {
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) return false;
    w_ = wt;
    c_ = ct;
    f_ = ft;
    safeguard_z();
    const double theta_t = one_norm(c_);
    if (theta_t <= 0.9 * theta0 && filter.acceptable(theta_t, barrier(w_, f_))) {
      evaluate_derivatives();
      init_multipliers();
      evaluate_derivatives();
      return true;
    }
  }
  return false;
}

IpmResult InteriorPoint::run(const IpmPoint& start, bool warm) {
  IpmResult result;
  setup();
  if (static_cast<int>(start.x.size()) != n_) {
    result.status = IpmStatus::failure;
    result.message = "start point has wrong dimension";
    return result;
  }
  build_kkt_pattern();

  // Primal start.
  w_.assign(at(nw_), 0.0);
  std::copy(start.x.begin(), start.x.end(), w_.begin());
  const double push = warm ? opt_.warm_bound_push : opt_.bound_push;
  const double frac = warm ? opt_.warm_bound_push : opt_.bound_frac;
  push_into_bounds(w_, push, frac);
  {
    std::vector<double> g(at(m_));
    try {
      nlp_.rows(std::span<const double>(w_.data(), at(n_)), g);
    } catch (const EvaluationError& e) {
      result.status = IpmStatus::failure;
      result.message = std::string("cannot evaluate start point: ") + e.what();
      return result;
    }
    for (int k = 0; k < mi_; ++k) w_[at(n_ + k)] = g[at(ineq_rows_[at(k)])];
  }
  push_into_bounds(w_, push, frac);
  if (!evaluate_point(w_, f_, c_)) {
    result.status = IpmStatus::failure;
    result.message = "start point evaluation failed";
    return result;
  }

  // Dual start.
  mu_ = warm ? opt_.warm_mu_init : opt_.mu_init;
  zl_.assign(at(nw_), 0.0);
  zu_.assign(at(nw_), 0.0);
  y_.assign(at(m_), 0.0);
  if (warm && start.y.size() == at(m_) && start.z_lower.size() == at(n_) &&
      start.z_upper.size() == at(n_)) {
    y_ = start.y;
    for (int j = 0; j < n_; ++j) {
      zl_[at(j)] = start.z_lower[at(j)];
      zu_[at(j)] = start.z_upper[at(j)];
    }
    for (int k = 0; k < mi_; ++k) {
      const double yi = y_[at(ineq_rows_[at(k)])];
      zl_[at(n_ + k)] = std::max(-yi, 0.0);
      zu_[at(n_ + k)] = std::max(yi, 0.0);
    }
    for (int k = 0; k < nw_; ++k) {
      const auto ks = at(k);
      if (has_l_[ks]) zl_[ks] = std::max(zl_[ks], mu_ / (w_[ks] - wl_[ks]));
      else zl_[ks] = 0.0;
      if (has_u_[ks]) zu_[ks] = std::max(zu_[ks], mu_ / (wu_[ks] - w_[ks]));
      else zu_[ks] = 0.0;
    }
    evaluate_derivatives();
  } else {
    for (int k = 0; k < nw_; ++k) {
      if (has_l_[at(k)]) zl_[at(k)] = 1.0;
      if (has_u_[at(k)]) zu_[at(k)] = 1.0;
    }
    evaluate_derivatives();
    init_multipliers();
    evaluate_derivatives();
  }

  const double theta_init = one_norm(c_);
  Filter filter;
  filter.theta_max = 1e4 * std::max(1.0, theta_init);
  const double theta_min = 1e-4 * std::max(1.0, theta_init);
  const double mu_min = opt_.tol / 10.0;

  std::vector<double> sigma;
  std::vector<double> grad_phi;
  std::vector<double> wt(at(nw_));
  std::vector<double> ct(at(m_));
  bool force_mu_update = false;
  int iter = 0;
  double dual_inf = 0.0;
  double compl_inf = 0.0;

  for (;; ++iter) {
    const double err0 = optimality_error(0.0, dual_inf, compl_inf);
    const double primal_inf = inf_norm(c_);
    result.optimality_error = err0;
    if (err0 <= opt_.tol && primal_inf <= opt_.constr_viol_tol) {
      result.status = IpmStatus::converged;
      result.message = "optimal solution found";
      break;
    }
    // Barrier update.
    double d_mu = 0.0;
    double c_mu = 0.0;
    while (mu_ > mu_min &&
           (force_mu_update || optimality_error(mu_, d_mu, c_mu) <= opt_.kappa_eps * mu_)) {
      mu_ = std::max(mu_min, std::min(opt_.kappa_mu * mu_, std::pow(mu_, opt_.theta_mu)));
      filter.reset();
      force_mu_update = false;
    }
    force_mu_update = false;
    if (iter >= opt_.max_iter) {
      result.status = IpmStatus::iteration_limit;
      result.message = "iteration limit reached";
      break;
    }

    // Newton step.
    compute_sigma(sigma);
    double delta_w = 0.0;
    if (!factor_with_inertia(sigma, delta_w)) {
      result.status = IpmStatus::failure;
      result.message = "KKT factorization failed";
      break;
    }
    std::vector<double> lag;
    barrier_gradient(grad_phi);
    lagrangian_gradient(lag);  // grad f + J^T y
    std::vector<double> rhs(at(nw_ + m_), 0.0);
    for (int k = 0; k < nw_; ++k) {
      if (fixed_[at(k)]) continue;
      const double gk = k < n_ ? grad_f_[at(k)] : 0.0;
      rhs[at(k)] = -(grad_phi[at(k)] + (lag[at(k)] - gk));
    }
    for (int i = 0; i < m_; ++i) rhs[at(nw_ + i)] = -c_[at(i)];
    const std::vector<double> rhs_dual(rhs.begin(), rhs.begin() + nw_);
    solve_refined(rhs, delta_c_now_);
    std::vector<double> dw(rhs.begin(), rhs.begin() + nw_);
    std::vector<double> dy(rhs.begin() + nw_, rhs.end());

    const double tau = std::max(opt_.tau_min, 1.0 - mu_);
    const double alpha_max = frac_to_boundary(dw, tau);
    const double theta = one_norm(c_);
    const double phi = barrier(w_, f_);
    double gphi_dw = 0.0;
    for (int k = 0; k < nw_; ++k) gphi_dw += grad_phi[at(k)] * dw[at(k)];

    double alpha_min = kGammaTheta;
    if (gphi_dw < 0.0) {
      alpha_min = std::min({kGammaTheta, kGammaPhi * theta / -gphi_dw,
                            kDeltaSwitch * std::pow(theta, kSTheta) / std::pow(-gphi_dw, kSPhi)});
    }
    alpha_min *= kGammaAlpha;

    // Tiny steps: accept without a line search.
    double step_rel = 0.0;
    for (int k = 0; k < nw_; ++k) {
      step_rel = std::max(step_rel, std::abs(dw[at(k)]) / (1.0 + std::abs(w_[at(k)])));
    }
    const bool tiny = step_rel < 10.0 * kEps;

    double alpha = alpha_max;
    bool accepted = false;
    bool f_type = false;
    int trials = 0;
    double f_t = 0.0;
    auto acceptable = [&](double theta_t, double phi_t, double a) {
      if (!filter.acceptable(theta_t, phi_t)) return false;
      const bool switching =
          gphi_dw < 0.0 && a * std::pow(-gphi_dw, kSPhi) > kDeltaSwitch * std::pow(theta, kSTheta);
      if (theta <= theta_min && switching) {
        f_type = true;
        return phi_t <= phi + kEtaPhi * a * gphi_dw;
      }
      f_type = false;
      return theta_t <= (1.0 - kGammaTheta) * theta || phi_t <= phi - kGammaPhi * theta;
    };

    if (tiny) {
      for (int k = 0; k < nw_; ++k) wt[at(k)] = w_[at(k)] + alpha * dw[at(k)];
      if (evaluate_point(wt, f_t, ct)) {
        accepted = true;
        f_type = true;
        force_mu_update = true;
      }
    }
    while (!accepted) {
      ++trials;
      for (int k = 0; k < nw_; ++k) wt[at(k)] = w_[at(k)] + alpha * dw[at(k)];
      double theta_t = kInf;
      if (evaluate_point(wt, f_t, ct)) {
        theta_t = one_norm(ct);
        if (acceptable(theta_t, barrier(wt, f_t), alpha)) {
          accepted = true;
          break;
        }
      }
      // Second-order corrections on the first trial.
      if (trials == 1 && std::isfinite(theta_t) && theta_t >= theta && opt_.max_soc > 0) {
        std::vector<double> c_soc(at(m_));
        for (int i = 0; i < m_; ++i) c_soc[at(i)] = alpha * c_[at(i)] + ct[at(i)];
        double theta_old = theta_t;
        std::vector<double> w_soc(at(nw_));
        std::vector<double> c_trial(at(m_));
        for (int p = 0; p < opt_.max_soc; ++p) {
          std::vector<double> r(at(nw_ + m_));
          for (int k = 0; k < nw_; ++k) r[at(k)] = alpha * rhs_dual[at(k)];
          for (int i = 0; i < m_; ++i) r[at(nw_ + i)] = -c_soc[at(i)];
          solve_refined(r, delta_c_now_);
          std::vector<double> d_soc(r.begin(), r.begin() + nw_);
          const double a_soc = frac_to_boundary(d_soc, tau);
          for (int k = 0; k < nw_; ++k) w_soc[at(k)] = w_[at(k)] + a_soc * d_soc[at(k)];
          double f_soc = 0.0;
          if (!evaluate_point(w_soc, f_soc, c_trial)) break;
          const double theta_soc = one_norm(c_trial);
          if (acceptable(theta_soc, barrier(w_soc, f_soc), alpha)) {
            accepted = true;
            wt = w_soc;
            ct = c_trial;
            f_t = f_soc;
            alpha = a_soc;
            break;
          }
          if (theta_soc > kKappaSoc * theta_old) break;
          theta_old = theta_soc;
          for (int i = 0; i < m_; ++i) c_soc[at(i)] = a_soc * c_soc[at(i)] + c_trial[at(i)];
        }
        if (accepted) break;
      }
      alpha *= 0.5;
      if (alpha < alpha_min) break;
    }

    IpmIteration rec;
    rec.iter = iter;
    rec.mu = mu_;
    rec.delta_w = delta_w;
    rec.line_search_trials = trials;

    if (!accepted) {
      if (theta <= opt_.constr_viol_tol * 1e-2) {
        // Feasible but stalled; shrink the barrier and retry.
        force_mu_update = true;
        rec.objective = f_;
        rec.inf_pr = inf_norm(c_);
        rec.inf_du = dual_inf;
        result.log.push_back(rec);
        continue;
      }
      rec.restoration = true;
      if (!restoration(filter)) {
        result.status = IpmStatus::infeasible;
        result.message = "restoration phase failed to reduce infeasibility";
        break;
      }
      rec.objective = f_;
      rec.inf_pr = inf_norm(c_);
      rec.inf_du = dual_inf;
      result.log.push_back(rec);
      continue;
    }
    if (!f_type) {
      filter.add((1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta);
    }

    // Dual step.
    std::vector<double> dzl(at(nw_), 0.0);
    std::vector<double> dzu(at(nw_), 0.0);
    for (int k = 0; k < nw_; ++k) {
      const auto ks = at(k);
      if (has_l_[ks]) {
        const double gap = w_[ks] - wl_[ks];
        dzl[ks] = mu_ / gap - zl_[ks] - zl_[ks] / gap * dw[ks];
      }
      if (has_u_[ks]) {
        const double gap = wu_[ks] - w_[ks];
        dzu[ks] = mu_ / gap - zu_[ks] + zu_[ks] / gap * dw[ks];
      }
    }
    const double alpha_z = frac_to_boundary_z(dzl, dzu, tau);
    w_ = wt;
    c_ = ct;
    f_ = f_t;
    for (int i = 0; i < m_; ++i) y_[at(i)] += alpha * dy[at(i)];
    for (int k = 0; k < nw_; ++k) {
      zl_[at(k)] += alpha_z * dzl[at(k)];
      zu_[at(k)] += alpha_z * dzu[at(k)];
    }
    safeguard_z();
    evaluate_derivatives();

    rec.objective = f_;
    rec.inf_pr = inf_norm(c_);
    rec.alpha_pr = alpha;
    rec.alpha_du = alpha_z;
    optimality_error(0.0, rec.inf_du, compl_inf);
    result.log.push_back(rec);
  }

  // Report in the caller's variables, clipped onto the original bounds.
  result.iterations = iter;
  result.point.x.assign(w_.begin(), w_.begin() + n_);
  for (int j = 0; j < n_; ++j) {
    result.point.x[at(j)] = std::clamp(result.point.x[at(j)], orig_l_[at(j)], orig_u_[at(j)]);
  }
  result.point.y = y_;
  result.point.z_lower.assign(zl_.begin(), zl_.begin() + n_);
  result.point.z_upper.assign(zu_.begin(), zu_.begin() + n_);
  std::vector<double> g(at(m_));
  try {
    result.objective = nlp_.objective(result.point.x);
    nlp_.rows(result.point.x, g);
    const auto rl = nlp_.row_lower();
    const auto ru = nlp_.row_upper();
    double viol = 0.0;
    for (int i = 0; i < m_; ++i) {
      viol = std::max({viol, rl[at(i)] - g[at(i)], g[at(i)] - ru[at(i)]});
    }
    result.constraint_violation = viol;
  } catch (const EvaluationError& e) {
    result.status = IpmStatus::failure;
    result.message = std::string("final point evaluation failed: ") + e.what();
  }
  return result;
}

}  // namespace

IpmResult solve_interior_point(const NlpInterface& nlp, const IpmPoint& start, bool warm,
                               const IpmOptions& options) {
  InteriorPoint ipm(nlp, options);
  return ipm.run(start, warm);
}

}  // namespace h2blend
