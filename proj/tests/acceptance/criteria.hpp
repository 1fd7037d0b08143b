#pragma once

#include <cstdio>
#include <iostream>
#include <string>

namespace acceptance {

// Each criterion prints one indented line per sub-check and returns whether
// all of them passed.
bool derivatives();
bool density_laws();
bool sampler_exactness();
bool parameter_recovery();
bool fmri_study();
bool dti_efficiency();
bool dti_bias();
bool tensor_parameterization();
bool cli_determinism();

inline bool report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << "  " << (pass ? "ok  " : "FAIL") << "  " << name << ": " << detail << std::endl;
  return pass;
}

inline std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace acceptance
