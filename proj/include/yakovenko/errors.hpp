#ifndef YAKOVENKO_ERRORS_HPP
#define YAKOVENKO_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace yakovenko {

// Base of every error thrown by this library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class domain_error : public error {
 public:
  using error::error;
};

class invalid_params : public domain_error {
 public:
  using domain_error::domain_error;
};

class invalid_coefficients : public domain_error {
 public:
  using domain_error::domain_error;
};

// The upper branch decays too slowly to carry finite mass.
class non_normalizable : public domain_error {
 public:
  using domain_error::domain_error;
};

class divergent_integral : public domain_error {
 public:
  using domain_error::domain_error;
};

class quadrature_error : public error {
 public:
  quadrature_error(const std::string& what, double achieved_rel_error)
      : error(what + " (achieved relative error " + std::to_string(achieved_rel_error) + ")"),
        achieved_(achieved_rel_error) {}

  double achieved_rel_error() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class config_error : public error {
 public:
  using error::error;
};

class numerical_blowup : public error {
 public:
  numerical_blowup(const std::string& what, std::size_t step)
      : error(what + " at step " + std::to_string(step)), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class format_error : public error {
 public:
  using error::error;
};

class empty_dataset : public error {
 public:
  using error::error;
};

class insufficient_data : public error {
 public:
  using error::error;
};

class unreliable_errors : public error {
 public:
  using error::error;
};

}  // namespace yakovenko

#endif  // YAKOVENKO_ERRORS_HPP
