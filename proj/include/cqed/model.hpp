#pragma once

// Hamiltonians and the cascaded JPA -> qubit/cavity generator.
//
// All frequencies and rates are angular (rad/s).  sigma_z = |e><e| - |g><g|,
// so the dispersive term -chi a^dag a sigma_z puts the cavity at omega_c + chi
// with the qubit in |g> and at omega_c - chi with the qubit in |e>.

#include <numbers>
#include <string>

#include "cqed/fock.hpp"

namespace cqed {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Cyclic MHz to rad/s.
constexpr double mhz(double f) { return kTwoPi * f * 1e6; }
constexpr double ghz(double f) { return kTwoPi * f * 1e9; }
constexpr double to_mhz(double omega) { return omega / (kTwoPi * 1e6); }

struct SystemParams {
  double omega_c = 0.0;        // dressed cavity
  double omega_q = 0.0;        // dressed qubit
  double chi = 0.0;            // dispersive shift
  double kappa = 0.0;          // total cavity decay
  double kappa_e = 0.0;        // cavity external coupling (JPA side)
  double kappa_e_prime = 0.0;  // JPA external coupling
  double n_th = 0.0;           // cavity thermal photon number
  double p_th = 0.0;           // qubit thermal excitation probability
  double gamma = 0.0;          // qubit decay, 1/T1
  double gamma_phi = 0.0;      // qubit pure dephasing
  double omega_s = 0.0;        // squeezed/coherent drive centre (JPA frequency)
  double omega_d = 0.0;        // qubit drive
  double omega_p = 0.0;        // cavity probe
  double Omega_s = 0.0;
  double Omega_d = 0.0;
  double Omega_p = 0.0;

  // Metadata only; never enters a Hamiltonian.
  double anharmonicity = 0.0;

  // Throws InvalidArgument when a rate is negative, kappa_e > kappa,
  // p_th is outside [0, 1] or any field is not finite.
  void validate() const;

  // Measured device values with omega_s = omega_c + chi, omega_d = omega_q,
  // omega_p = omega_c - chi and no cavity drive.
  static SystemParams table_s1();
};

enum class Frame {
  squeeze,  // H0 = omega_s (a^dag a + b^dag b) + (omega_d / 2) sigma_z
  probe,    // H0 = omega_p a^dag a + (omega_d / 2) sigma_z, JPA absent
};

const char* to_string(Frame f);

class DriveKind {
 public:
  enum class Tag { off, thermal, coherent, squeezed };

  static DriveKind off() { return DriveKind(Tag::off, 0.0); }
  static DriveKind thermal(double n_th_drive);
  static DriveKind coherent(double Omega_s);
  static DriveKind squeezed(double Omega_s);

  Tag tag() const { return tag_; }
  // n_th of the cavity bath for thermal, Omega_s for coherent/squeezed.
  double value() const { return value_; }
  bool needs_jpa() const { return tag_ == Tag::coherent || tag_ == Tag::squeezed; }

  friend bool operator==(const DriveKind&, const DriveKind&) = default;

 private:
  DriveKind(Tag tag, double value) : tag_(tag), value_(value) {}
  Tag tag_;
  double value_;
};

const char* to_string(DriveKind::Tag t);
DriveKind::Tag drive_tag_from_string(const std::string& s);

// Parameters with the drive folded in (thermal overrides n_th, coherent and
// squeezed override Omega_s).
SystemParams effective_params(const SystemParams& p, const DriveKind& kind);

// System A Hamiltonian in the chosen frame.  In the squeeze frame the probe
// term is time dependent unless omega_p == omega_s; requesting it otherwise
// throws.
Operator build_system_hamiltonian(const SystemParams& p, Frame frame, const SpaceLayout& layout,
                                  bool include_probe = false);

// (Omega_s / 2)(b^dag^2 + b^2) for squeezed, (Omega_s / 2)(b^dag + b) for coherent.
Operator build_jpa_hamiltonian(const DriveKind& kind, const SpaceLayout& layout);

struct GeneratorTerms {
  Operator hamiltonian;
  std::vector<Channel> channels;
  std::vector<CascadeCoupling> cascade;
};

GeneratorTerms cascaded_generator_terms(const SystemParams& p, const DriveKind& kind, Frame frame,
                                        const SpaceLayout& layout, bool include_probe = false);

// Full cascaded master-equation generator: unitary part, cascade cross terms
// sqrt(kappa_e kappa_e'), JPA output kappa_e', cavity kappa(1 + n_th) and
// kappa n_th, qubit gamma(1 + p_th) and gamma p_th, dephasing gamma_phi on
// sigma^dag sigma.  A layout with jpa_dim == 1 drops every JPA term.
Superoperator build_cascaded_generator(const SystemParams& p, const DriveKind& kind, Frame frame,
                                       const SpaceLayout& layout, bool include_probe = false);

// -i[(1/2) sigma_z, .]: the generator's derivative with respect to
// (omega_q - omega_d).  Used to patch a qubit-drive sweep without rebuilding.
Superoperator qubit_detuning_generator(const SpaceLayout& layout);

}  // namespace cqed
