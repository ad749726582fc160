#include <abc/analytic.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <ostream>
#include <sstream>

#include <abc/errors.hpp>

namespace abc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -kTwoPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

struct Spectrum {
  std::vector<double> cosc, sinc;
  double tail = 0.0;
};

Spectrum quad_spectrum(const StepProfile& sp, double slope_d, std::size_t M, int N) {
  std::vector<std::complex<double>> buf(M);
  const double inv = 1.0 / static_cast<double>(M);
  for (std::size_t t = 0; t < M; ++t) {
    const double x = static_cast<double>(t) * inv;
    buf[t] = std::complex<double>(profile_value(sp, x).value - slope_d * x, 0.0);
  }
  fft_inplace(buf);
  Spectrum out;
  out.cosc.assign(static_cast<std::size_t>(N) + 1, 0.0);
  out.sinc.assign(static_cast<std::size_t>(N) + 1, 0.0);
  out.cosc[0] = buf[0].real() * inv;
  for (int m = 1; m <= N; ++m) {
    out.cosc[static_cast<std::size_t>(m)] = 2.0 * buf[static_cast<std::size_t>(m)].real() * inv;
    out.sinc[static_cast<std::size_t>(m)] = -2.0 * buf[static_cast<std::size_t>(m)].imag() * inv;
  }
  for (std::size_t m = M / 4; m < M / 2; ++m)
    out.tail = std::max(out.tail, 2.0 * std::abs(buf[m]) * inv);
  return out;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

class AnalyticShearNode final : public MapNode {
 public:
  explicit AnalyticShearNode(TrigProfile tp) : tp_(std::move(tp)) {}

  PartialMapResult eval(const TorusPoint& p, bool inverse) const override {
    const double sgn = inverse ? -1.0 : 1.0;
    PartialMapResult out;
    out.jet.point = TorusPoint{mod1d(p.theta + sgn * tp_.eval(p.r)), p.r};
    out.jet.deriv = Mat2{1.0, sgn * tp_.deriv(p.r, 1), 0.0, 1.0};
    out.tag = Tag::GOOD;
    out.fiber = FiberShift{false, Rational(0)};
    return out;
  }

  bool has_exact_inverse() const override { return true; }
  double min_feature_width() const override { return 1.0 / (8.0 * static_cast<double>(std::max(1, tp_.degree))); }

  std::string name() const override {
    std::ostringstream os;
    os << "g_hat[N=" << tp_.degree << "]";
    return os.str();
  }

 private:
  TrigProfile tp_;
};

}  // namespace

std::string to_string(ApproxScheme s) { return s == ApproxScheme::FEJER ? "fejer" : "truncation"; }

double TrigProfile::eval(double x) const {
  double sum = cosc.empty() ? 0.0 : cosc[0];
  sum += to_double(slope) * x;
  for (int m = 1; m <= degree; ++m) {
    const double ph = kTwoPi * static_cast<double>(m) * x;
    sum += cosc[static_cast<std::size_t>(m)] * std::cos(ph) + sinc[static_cast<std::size_t>(m)] * std::sin(ph);
  }
  return sum;
}

double TrigProfile::deriv(double x, int order) const {
  if (order < 0) raise(ErrorCode::BAD_ARGUMENT, "TrigProfile::deriv: negative order");
  if (order == 0) return eval(x);
  double sum = (order == 1) ? to_double(slope) : 0.0;
  for (int m = 1; m <= degree; ++m) {
    const double c = cosc[static_cast<std::size_t>(m)];
    const double s = sinc[static_cast<std::size_t>(m)];
    if (c == 0.0 && s == 0.0) continue;
    const double w = kTwoPi * static_cast<double>(m);
    const double amp = std::pow(w, order);
    const double ph = w * x;
    double term = 0.0;
    switch (order & 3) {
      case 0: term = c * std::cos(ph) + s * std::sin(ph); break;
      case 1: term = -c * std::sin(ph) + s * std::cos(ph); break;
      case 2: term = -c * std::cos(ph) - s * std::sin(ph); break;
      default: term = c * std::sin(ph) - s * std::cos(ph); break;
    }
    sum += amp * term;
  }
  return sum;
}

TrigProfile trig_profile(std::vector<double> cosc, std::vector<double> sinc, Rational slope) {
  if (cosc.empty()) cosc.push_back(0.0);
  if (sinc.size() < cosc.size()) sinc.resize(cosc.size(), 0.0);
  if (sinc.size() > cosc.size()) cosc.resize(sinc.size(), 0.0);
  TrigProfile tp;
  tp.degree = static_cast<int>(cosc.size()) - 1;
  tp.cosc = std::move(cosc);
  tp.sinc = std::move(sinc);
  tp.sinc[0] = 0.0;
  tp.slope = std::move(slope);
  return tp;
}

TrigProfile approximate_profile(const StepProfile& sp, int degree, ApproxScheme scheme, double quad_tol) {
  if (degree < 1) raise(ErrorCode::BAD_ARGUMENT, "approximate_profile: degree must be >= 1");
  const std::size_t M = next_pow2(std::max<std::size_t>(8 * static_cast<std::size_t>(degree), 4096));
  if (M > (std::size_t(1) << 22)) raise(ErrorCode::BAD_ARGUMENT, "approximate_profile: degree too large");
  const Rational slope = Rational(sp.b * (sp.a - 1), sp.a);
  const double slope_d = to_double(slope);
  Spectrum s1 = quad_spectrum(sp, slope_d, M, degree);
  Spectrum s2 = quad_spectrum(sp, slope_d, 2 * M, degree);
  double delta = 0.0;
  for (int m = 0; m <= degree; ++m) {
    delta = std::max(delta, std::fabs(s1.cosc[static_cast<std::size_t>(m)] - s2.cosc[static_cast<std::size_t>(m)]));
    delta = std::max(delta, std::fabs(s1.sinc[static_cast<std::size_t>(m)] - s2.sinc[static_cast<std::size_t>(m)]));
  }
  const double tol = quad_tol >= 0.0 ? quad_tol : 1e-9 * std::max(1.0, std::fabs(to_double(sp.b)));
  if (s2.tail > tol || delta > tol) {
    std::ostringstream os;
    os << "approximate_profile: quadrature unconverged (tail " << s2.tail << ", delta " << delta << ", tol " << tol
       << "); the profile needs a higher degree to resolve its bands";
    raise(ErrorCode::QUADRATURE_UNCONVERGED, os.str());
  }
  TrigProfile tp;
  tp.degree = degree;
  tp.cosc = std::move(s2.cosc);
  tp.sinc = std::move(s2.sinc);
  tp.slope = slope;
  if (scheme == ApproxScheme::FEJER) {
    for (int m = 1; m <= degree; ++m) {
      const double w = 1.0 - static_cast<double>(m) / static_cast<double>(degree + 1);
      tp.cosc[static_cast<std::size_t>(m)] *= w;
      tp.sinc[static_cast<std::size_t>(m)] *= w;
    }
  }
  return tp;
}

double strip_norm(const TrigProfile& tp, double rho) {
  if (rho < 0.0) raise(ErrorCode::BAD_ARGUMENT, "strip_norm: rho must be >= 0");
  double sum = tp.cosc.empty() ? 0.0 : std::fabs(tp.cosc[0]);
  sum += std::fabs(to_double(tp.slope)) * (1.0 + rho);
  for (int m = 1; m <= tp.degree; ++m) {
    const double mag =
        std::fabs(tp.cosc[static_cast<std::size_t>(m)]) + std::fabs(tp.sinc[static_cast<std::size_t>(m)]);
    if (mag == 0.0) continue;
    sum += mag * std::exp(kTwoPi * static_cast<double>(m) * rho);
  }
  return sum;
}

TrigProfile periodic_rescale(const TrigProfile& tp, const Int& q) {
  if (q < 1) raise(ErrorCode::BAD_ARGUMENT, "periodic_rescale: q must be >= 1");
  if (q == 1) return tp;
  if (Int(tp.degree) * q > (Int(1) << 22)) raise(ErrorCode::BAD_ARGUMENT, "periodic_rescale: rescaled degree too large");
  const auto ql = q.convert_to<long long>();
  TrigProfile out;
  out.degree = static_cast<int>(tp.degree * ql);
  out.cosc.assign(static_cast<std::size_t>(out.degree) + 1, 0.0);
  out.sinc.assign(static_cast<std::size_t>(out.degree) + 1, 0.0);
  const double qd = static_cast<double>(ql);
  out.cosc[0] = tp.cosc.empty() ? 0.0 : tp.cosc[0] / qd;
  for (int m = 1; m <= tp.degree; ++m) {
    out.cosc[static_cast<std::size_t>(m * ql)] = tp.cosc[static_cast<std::size_t>(m)] / qd;
    out.sinc[static_cast<std::size_t>(m * ql)] = tp.sinc[static_cast<std::size_t>(m)] / qd;
  }
  out.slope = tp.slope;
  return out;
}

bool freq_support_divisible(const TrigProfile& tp, const Int& q, double tol) {
  if (q < 1) raise(ErrorCode::BAD_ARGUMENT, "freq_support_divisible: q must be >= 1");
  for (int m = 1; m <= tp.degree; ++m) {
    const double mag =
        std::fabs(tp.cosc[static_cast<std::size_t>(m)]) + std::fabs(tp.sinc[static_cast<std::size_t>(m)]);
    if (mag > tol && Int(m) % q != 0) return false;
  }
  return true;
}

MapExpr analytic_shear_map(const TrigProfile& tp) { return std::make_shared<AnalyticShearNode>(tp); }

ApproxReport distance_report(const MapExpr& smooth, const MapExpr& analytic, int grid, const Rational& eps_target) {
  if (grid < 64) raise(ErrorCode::BAD_ARGUMENT, "distance_report: grid must be >= 64");
  ApproxReport rep;
  rep.target = smooth->name() + "~" + analytic->name();
  rep.grid = grid;
  rep.eps_target = eps_target;
  const double h = 1.0 / static_cast<double>(grid);
  auto second_diff = [&](const MapExpr& e, const TorusPoint& p, const TorusPoint& img, bool theta_axis, double& s0,
                         double& s1) {
    TorusPoint pp = theta_axis ? TorusPoint{p.theta + h, p.r} : TorusPoint{p.theta, p.r + h};
    TorusPoint pm = theta_axis ? TorusPoint{p.theta - h, p.r} : TorusPoint{p.theta, p.r - h};
    TorusPoint fp = eval_jet(e, pp).jet.point;
    TorusPoint fm = eval_jet(e, pm).jet.point;
    const double ih2 = 1.0 / (h * h);
    s0 = (circ_diff(fp.theta, img.theta) - circ_diff(img.theta, fm.theta)) * ih2;
    s1 = (circ_diff(fp.r, img.r) - circ_diff(img.r, fm.r)) * ih2;
  };
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const TorusPoint p{(i + 0.5) * h, (j + 0.5) * h};
      PartialMapResult a = eval_jet(smooth, p);
      PartialMapResult b = eval_jet(analytic, p);
      rep.d0 = std::max(rep.d0, std::hypot(circ_diff(b.jet.point.theta, a.jet.point.theta),
                                           circ_diff(b.jet.point.r, a.jet.point.r)));
      const Mat2 da = a.jet.deriv, db = b.jet.deriv;
      rep.d1 = std::max({rep.d1, std::fabs(da.a - db.a), std::fabs(da.b - db.b), std::fabs(da.c - db.c),
                         std::fabs(da.d - db.d)});
      for (bool axis : {true, false}) {
        double sa0, sa1, sb0, sb1;
        second_diff(smooth, p, a.jet.point, axis, sa0, sa1);
        second_diff(analytic, p, b.jet.point, axis, sb0, sb1);
        rep.d2 = std::max({rep.d2, std::fabs(sa0 - sb0), std::fabs(sa1 - sb1)});
      }
    }
  }
  const double eps = to_double(eps_target);
  rep.satisfied = rep.d0 <= eps && rep.d1 <= eps && rep.d2 <= eps;
  return rep;
}

void write_coefficients_csv(std::ostream& os, const TrigProfile& tp) {
  os << "# slope," << to_string(tp.slope) << "\n";
  os << "m,c_m,s_m\n";
  os.precision(17);
  for (int m = 0; m <= tp.degree; ++m)
    os << m << "," << tp.cosc[static_cast<std::size_t>(m)] << "," << tp.sinc[static_cast<std::size_t>(m)] << "\n";
}

}  // namespace abc
