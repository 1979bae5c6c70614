#pragma once

#include <array>

#include "wavelatent/tape.hpp"
#include "wavelatent/tensor.hpp"

namespace wavelatent {

/// One level of a 2D Haar decomposition.
///
/// Naming follows (width filter, height filter): HL is high-pass across
/// columns and low-pass across rows, i.e. horizontal detail.
struct SubBandSet {
  Tensor ll;
  Tensor lh;
  Tensor hl;
  Tensor hh;
  int source_height = 0;
  int source_width = 0;

  std::array<const Tensor*, 4> bands() const { return {&ll, &lh, &hl, &hh}; }
};

/// Orthonormal single-level Haar analysis of an NCHW tensor, width axis first
/// then height. For a 2x2 block [[a, b], [c, d]]:
///   LL = (a+b+c+d)/2, HL = (a-b+c-d)/2, LH = (a+b-c-d)/2, HH = (a-b-c+d)/2.
/// An odd dimension is extended by one mirrored row/column (half-sample
/// symmetric) before filtering. Differentiable.
SubBandSet dwt2(Tape& tape, const Tensor& x);

/// Haar synthesis; exact inverse of dwt2. For an odd source dimension the
/// padded reconstruction is truncated back to the source size. Differentiable.
Tensor idwt2(Tape& tape, const SubBandSet& bands);

/// Fraction of total squared-coefficient energy per band, in LL, LH, HL, HH
/// order. All zeros when the bands carry no energy.
std::array<double, 4> band_energy_fractions(const SubBandSet& bands);

}  // namespace wavelatent
