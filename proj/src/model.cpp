#include "cqed/model.hpp"

#include <cmath>

#include "cqed/error.hpp"

namespace cqed {

void SystemParams::validate() const {
  const double all[] = {omega_c, omega_q, chi,     kappa,   kappa_e, kappa_e_prime, n_th,    p_th,
                        gamma,   gamma_phi, omega_s, omega_d, omega_p, Omega_s,       Omega_d, Omega_p};
  for (double v : all)
    if (!std::isfinite(v)) throw InvalidArgument("SystemParams: non-finite value");
  const double rates[] = {kappa, kappa_e, kappa_e_prime, gamma, gamma_phi};
  for (double r : rates)
    if (r < 0.0) throw InvalidArgument("SystemParams: rates must be >= 0");
  if (kappa_e > kappa) throw InvalidArgument("SystemParams: kappa_e exceeds kappa");
  if (n_th < 0.0) throw InvalidArgument("SystemParams: n_th must be >= 0");
  if (p_th < 0.0 || p_th > 1.0) throw InvalidArgument("SystemParams: p_th must lie in [0, 1]");
  if (Omega_s < 0.0 || Omega_d < 0.0 || Omega_p < 0.0)
    throw InvalidArgument("SystemParams: drive amplitudes must be >= 0");
}

SystemParams SystemParams::table_s1() {
  SystemParams p;
  p.omega_c = ghz(10.4005);
  p.kappa_e = mhz(0.490);
  p.kappa = mhz(0.494);
  p.n_th = 0.04;
  p.Omega_p = mhz(0.16);
  p.omega_q = ghz(8.7941);
  p.gamma = 1.0 / 5.5e-6;
  p.gamma_phi = 0.0;
  p.p_th = 0.01;
  p.Omega_d = mhz(0.46);
  p.chi = mhz(3.9);
  p.kappa_e_prime = mhz(40.0);
  p.anharmonicity = -mhz(136.0);
  p.omega_s = p.omega_c + p.chi;
  p.omega_d = p.omega_q;
  p.omega_p = p.omega_c - p.chi;
  p.Omega_s = 0.0;
  return p;
}

const char* to_string(Frame f) { return f == Frame::squeeze ? "squeeze-frame" : "probe-frame"; }

DriveKind DriveKind::thermal(double n_th_drive) {
  if (!(n_th_drive >= 0.0)) throw InvalidArgument("thermal drive: n_th must be >= 0");
  return DriveKind(Tag::thermal, n_th_drive);
}

DriveKind DriveKind::coherent(double Omega_s) {
  if (!(Omega_s >= 0.0)) throw InvalidArgument("coherent drive: amplitude must be >= 0");
  return DriveKind(Tag::coherent, Omega_s);
}

DriveKind DriveKind::squeezed(double Omega_s) {
  if (!(Omega_s >= 0.0)) throw InvalidArgument("squeezed drive: amplitude must be >= 0");
  return DriveKind(Tag::squeezed, Omega_s);
}

const char* to_string(DriveKind::Tag t) {
  switch (t) {
    case DriveKind::Tag::off: return "off";
    case DriveKind::Tag::thermal: return "thermal";
    case DriveKind::Tag::coherent: return "coherent";
    case DriveKind::Tag::squeezed: return "squeezed";
  }
  return "invalid";
}

DriveKind::Tag drive_tag_from_string(const std::string& s) {
  if (s == "off") return DriveKind::Tag::off;
  if (s == "thermal") return DriveKind::Tag::thermal;
  if (s == "coherent") return DriveKind::Tag::coherent;
  if (s == "squeezed") return DriveKind::Tag::squeezed;
  throw InvalidArgument("unknown drive kind '" + s + "'");
}

SystemParams effective_params(const SystemParams& p, const DriveKind& kind) {
  SystemParams out = p;
  switch (kind.tag()) {
    case DriveKind::Tag::off: break;
    case DriveKind::Tag::thermal: out.n_th = kind.value(); break;
    case DriveKind::Tag::coherent:
    case DriveKind::Tag::squeezed: out.Omega_s = kind.value(); break;
  }
  return out;
}

Operator build_system_hamiltonian(const SystemParams& p, Frame frame, const SpaceLayout& layout,
                                  bool include_probe) {
  p.validate();
  if (frame == Frame::probe && layout.has_jpa())
    throw InvalidArgument("probe frame requires the JPA to be absent (jpa_dim = 1)");

  const double frame_freq = frame == Frame::squeeze ? p.omega_s : p.omega_p;
  if (include_probe && frame == Frame::squeeze && p.omega_p != p.omega_s)
    throw InvalidArgument("probe term is time dependent in the squeeze frame unless omega_p == omega_s");

  const QubitOps q = qubit_ops();
  const int nc = layout.cavity_dim();
  Operator h = Operator::zero(layout);

  const Operator sz = embed(q.z, Subsystem::qubit, layout);
  const Operator sx = embed(SparseMat(q.lower + q.raise), Subsystem::qubit, layout);
  h += cplx(0.5 * (p.omega_q - p.omega_d)) * sz;
  h += cplx(0.5 * p.Omega_d) * sx;

  if (nc > 1) {
    const Operator a = embed(annihilation(nc), Subsystem::cavity, layout);
    const Operator num = a.adjoint() * a;
    h += cplx(p.omega_c - frame_freq) * num;
    h -= cplx(p.chi) * (num * sz);
    if (include_probe) h += cplx(0.5 * p.Omega_p) * (a + a.adjoint());
  }
  return h;
}

Operator build_jpa_hamiltonian(const DriveKind& kind, const SpaceLayout& layout) {
  if (!kind.needs_jpa())
    throw InvalidArgument(std::string("JPA Hamiltonian undefined for drive kind '") + to_string(kind.tag()) +
                          "'; thermal and off enter through bath parameters");
  if (!layout.has_jpa()) throw InvalidArgument("JPA Hamiltonian needs jpa_dim >= 2");
  const Operator b = embed(annihilation(layout.jpa_dim()), Subsystem::jpa, layout);
  const Operator bd = b.adjoint();
  const cplx half(0.5 * kind.value());
  if (kind.tag() == DriveKind::Tag::squeezed) return half * (bd * bd + b * b);
  return half * (bd + b);
}

GeneratorTerms cascaded_generator_terms(const SystemParams& params, const DriveKind& kind, Frame frame,
                                        const SpaceLayout& layout, bool include_probe) {
  const SystemParams p = effective_params(params, kind);
  if (kind.needs_jpa()) {
    if (frame != Frame::squeeze)
      throw InvalidArgument(std::string(to_string(kind.tag())) + " drive requires the squeeze frame");
    if (!layout.has_jpa())
      throw InvalidArgument(std::string(to_string(kind.tag())) + " drive requires jpa_dim >= 2");
  }

  GeneratorTerms terms{build_system_hamiltonian(p, frame, layout, include_probe), {}, {}};

  const QubitOps q = qubit_ops();
  const Operator s = embed(q.lower, Subsystem::qubit, layout);
  const Operator sd = s.adjoint();

  if (layout.cavity_dim() > 1) {
    const Operator a = embed(annihilation(layout.cavity_dim()), Subsystem::cavity, layout);
    terms.channels.push_back({p.kappa * (1.0 + p.n_th), a});
    terms.channels.push_back({p.kappa * p.n_th, a.adjoint()});
    if (layout.has_jpa()) {
      const Operator b = embed(annihilation(layout.jpa_dim()), Subsystem::jpa, layout);
      terms.channels.push_back({p.kappa_e_prime, b});
      terms.cascade.push_back({std::sqrt(p.kappa_e * p.kappa_e_prime), b, a});
    }
  }
  terms.channels.push_back({p.gamma * (1.0 + p.p_th), s});
  terms.channels.push_back({p.gamma * p.p_th, sd});
  terms.channels.push_back({p.gamma_phi, sd * s});

  if (kind.needs_jpa()) terms.hamiltonian += build_jpa_hamiltonian(kind, layout);
  return terms;
}

Superoperator build_cascaded_generator(const SystemParams& p, const DriveKind& kind, Frame frame,
                                       const SpaceLayout& layout, bool include_probe) {
  const GeneratorTerms t = cascaded_generator_terms(p, kind, frame, layout, include_probe);
  return vectorize_generator(t.hamiltonian, t.channels, t.cascade);
}

Superoperator qubit_detuning_generator(const SpaceLayout& layout) {
  const Operator half_sz = cplx(0.5) * embed(qubit_ops().z, Subsystem::qubit, layout);
  return vectorize_generator(half_sz, std::span<const Channel>{});
}

}  // namespace cqed
