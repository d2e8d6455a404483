#include "qsd/kernels.hpp"

#include <immintrin.h>

namespace qsd::kernels::avx2 {

namespace {

struct Mul {
  __m256i hi;
  __m256i lo;
};

// 32x32 -> 64 products for all eight lanes; mul_epu32 only covers the even ones.
inline Mul mulhilo(__m256i a, __m256i m) {
  const __m256i even = _mm256_mul_epu32(a, m);
  const __m256i odd = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), m);
  return {_mm256_blend_epi32(_mm256_srli_epi64(even, 32), odd, 0xAA),
          _mm256_blend_epi32(even, _mm256_slli_epi64(odd, 32), 0xAA)};
}

// Bits [63:12] of each 64-bit word as a double in [0,1), exact: OR the 52 bits into
// the mantissa of 1.0 and subtract 1.

inline __m256d words_to_unit(__m256i packed) {
  const __m256i mantissa = _mm256_srli_epi64(packed, 12);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(mantissa, one_bits)), _mm256_set1_pd(1.0));
}

}  // namespace

void fill_uniforms(PhiloxKey key, std::uint64_t step, std::uint32_t purpose, std::uint32_t first_lane,
                   std::span<double> out) {
  const std::size_t n = out.size();
  std::size_t i = 0;
  const __m256i m0 = _mm256_set1_epi32(static_cast<int>(kPhiloxM0));
  const __m256i m1 = _mm256_set1_epi32(static_cast<int>(kPhiloxM1));
  const __m256i lane_offsets = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  for (; i + 8 <= n; i += 8) {
    __m256i c0 = _mm256_add_epi32(_mm256_set1_epi32(static_cast<int>(first_lane + i)), lane_offsets);
    __m256i c1 = _mm256_set1_epi32(static_cast<int>(purpose));
    __m256i c2 = _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(step)));
    __m256i c3 = _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(step >> 32)));
    std::uint32_t k0 = key.k0;
    std::uint32_t k1 = key.k1;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
      }
      const Mul p0 = mulhilo(c0, m0);
      const Mul p1 = mulhilo(c2, m1);
      c0 = _mm256_xor_si256(_mm256_xor_si256(p1.hi, c1), _mm256_set1_epi32(static_cast<int>(k0)));
      c1 = p1.lo;
      c2 = _mm256_xor_si256(_mm256_xor_si256(p0.hi, c3), _mm256_set1_epi32(static_cast<int>(k1)));
      c3 = p0.lo;
    }
    // (c1:c0) per lane -> 64-bit words, restored to lane order.
    const __m256i lo = _mm256_unpacklo_epi32(c0, c1);  // lanes 0,1 | 4,5
    const __m256i hi = _mm256_unpackhi_epi32(c0, c1);  // lanes 2,3 | 6,7
    _mm256_storeu_pd(out.data() + i, words_to_unit(_mm256_permute2x128_si256(lo, hi, 0x20)));
    _mm256_storeu_pd(out.data() + i + 4, words_to_unit(_mm256_permute2x128_si256(lo, hi, 0x31)));
  }
  if (i < n) {
    scalar::fill_uniforms(key, step, purpose, first_lane + static_cast<std::uint32_t>(i), out.subspan(i));
  }
}

void sample_rows(std::span<const double> cdf, int d, std::span<const double> u,
                 std::span<std::int32_t> states) {
  const std::size_t n = states.size();
  std::size_t i = 0;
  const __m128i stride = _mm_set1_epi32(d);
  const __m256i pack = _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0);
  for (; i + 4 <= n; i += 4) {
    const __m128i s = _mm_loadu_si128(reinterpret_cast<const __m128i*>(states.data() + i));
    const __m128i base = _mm_mullo_epi32(s, stride);
    const __m256d uu = _mm256_loadu_pd(u.data() + i);
    __m256i count = _mm256_setzero_si256();
    for (int k = 0; k < d - 1; ++k) {
      const __m256d c = _mm256_i32gather_pd(cdf.data(), _mm_add_epi32(base, _mm_set1_epi32(k)), 8);
      count = _mm256_sub_epi64(count, _mm256_castpd_si256(_mm256_cmp_pd(c, uu, _CMP_LE_OQ)));
    }
    const __m256i packed = _mm256_permutevar8x32_epi32(count, pack);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(states.data() + i), _mm256_castsi256_si128(packed));
  }
  if (i < n) scalar::sample_rows(cdf, d, u.subspan(i), states.subspan(i));
}

}  // namespace qsd::kernels::avx2
