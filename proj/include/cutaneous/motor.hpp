#pragma once

// Simulated DC motor with a potentiometer read through an ADC, and the
// joint PID that drives it.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cutaneous/error.hpp"
#include "cutaneous/geometry.hpp"

namespace cutaneous {

struct MotorParams {
  double time_constant = 0.020;  // s
  double gain = 35.0;            // rad/s per V
  double voltage_limit = 6.0;    // V
  int sensor_bits = 12;
  double sensor_range = deg_to_rad(270.0);

  void validate() const {
    if (!(time_constant > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time_constant must be > 0");
    if (sensor_bits < 8 || sensor_bits > 24)
      throw Error(ErrorCode::kInvalidArgument, "sensor_bits must be in [8, 24]");
    if (!(voltage_limit > 0.0) || !(sensor_range > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "voltage_limit and sensor_range must be > 0");
  }

  double quantum() const { return sensor_range / std::ldexp(1.0, sensor_bits); }
};

/// First-order velocity dynamics driven by a saturated voltage.
struct MotorPlant {
  MotorParams params;
  double angle = 0.0;          // rad
  double velocity = 0.0;       // rad/s
  double sensor_center = 0.0;  // rad; the ADC covers center +- range/2

  /// ADC reading of the current angle: rounded to the nearest code and
  /// clipped to the sensor span.
  double read(double noise = 0.0) const {
    const double q = params.quantum();
    const double lo = sensor_center - params.sensor_range / 2.0;
    const double max_code = std::ldexp(1.0, params.sensor_bits) - 1.0;
    const double code = std::clamp(std::round((angle + noise - lo) / q), 0.0, max_code);
    return lo + code * q;
  }
};

inline double saturate(double v, double limit) { return std::clamp(v, -limit, limit); }

/// Advances the plant by dt and returns the quantized sensor reading.
inline double motor_plant_step(MotorPlant& plant, double voltage, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be > 0");
  const double v = saturate(voltage, plant.params.voltage_limit);
  plant.velocity += (plant.params.gain * v - plant.velocity) / plant.params.time_constant * dt;
  plant.angle += plant.velocity * dt;
  return plant.read();
}

struct PidGains {
  double kp = 8.0;              // V/rad
  double ki = 4.0;              // V/(rad s)
  double kd = 0.08;             // V s/rad
  double integral_limit = 1.0;  // V
  double output_limit = 6.0;    // V
};

/// PID on the angle error. The integral is stored in volts and clamped to
/// +-integral_limit; the derivative acts on the error and is zero on the
/// first call.
class PidController {
 public:
  PidController(PidGains gains, double dt) : gains_(gains), dt_(dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "pid dt must be > 0");
  }

  double step(double target, double actual) {
    const double e = target - actual;
    integral_ = saturate(integral_ + gains_.ki * e * dt_, gains_.integral_limit);
    const double de = has_prev_ ? (e - prev_error_) / dt_ : 0.0;
    prev_error_ = e;
    has_prev_ = true;
    return saturate(gains_.kp * e + integral_ + gains_.kd * de, gains_.output_limit);
  }

  void reset() {
    integral_ = 0.0;
    prev_error_ = 0.0;
    has_prev_ = false;
  }

  double integral() const { return integral_; }
  double dt() const { return dt_; }
  const PidGains& gains() const { return gains_; }

 private:
  PidGains gains_;
  double dt_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

}  // namespace cutaneous
