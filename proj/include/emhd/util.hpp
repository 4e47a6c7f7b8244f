#pragma once
#include <complex>
#include <cstdlib>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

namespace emhd {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// 64-byte aligned allocator so FFTW's SIMD paths see the same alignment class
// as its own planning buffers.
template <class T>
struct AlignedAlloc {
  using value_type = T;
  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U>&) {}
  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    void* p = std::aligned_alloc(64, ((n * sizeof(T) + 63) / 64) * 64);
    if (!p) throw std::bad_alloc{};
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }
  template <class U>
  bool operator==(const AlignedAlloc<U>&) const {
    return true;
  }
};

using RVec = std::vector<double, AlignedAlloc<double>>;
using CVec = std::vector<std::complex<double>, AlignedAlloc<std::complex<double>>>;

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace emhd
