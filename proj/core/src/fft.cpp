#include "toeplab/fft.hpp"

#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace toeplab {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan make_plan(int n1, int n2, int s, int sign) {
    // FFTW_ESTIMATE leaves the scratch buffer untouched, and FFTW_UNALIGNED lets
    // the plan run on any caller buffer through fftw_execute_dft.
    std::vector<fftw_complex> scratch(static_cast<std::size_t>(n1) * n2 * s);
    const int dims[2] = {n1, n2};
    fftw_plan plan = fftw_plan_many_dft(2, dims, s, scratch.data(), nullptr, s, 1, scratch.data(), nullptr, s, 1, sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw std::runtime_error("FFTW could not create a plan");
    return plan;
}

} // namespace

struct Fft2::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~Plans() {
        std::lock_guard lock(planner_mutex());
        if (forward != nullptr) fftw_destroy_plan(forward);
        if (backward != nullptr) fftw_destroy_plan(backward);
    }
};

Fft2::Fft2(int n1, int n2, int s) : n1_(n1), n2_(n2), s_(s), plans_(std::make_unique<Plans>()) {
    if (n1 <= 0 || n2 <= 0 || s <= 0) throw std::invalid_argument("Fft2: dimensions must be positive");
    std::lock_guard lock(planner_mutex());
    plans_->forward = make_plan(n1, n2, s, FFTW_FORWARD);
    plans_->backward = make_plan(n1, n2, s, FFTW_BACKWARD);
}

Fft2::~Fft2() = default;
Fft2::Fft2(Fft2&&) noexcept = default;
Fft2& Fft2::operator=(Fft2&&) noexcept = default;

void Fft2::forward(std::complex<double>* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plans_->forward, p, p);
}

void Fft2::backward(std::complex<double>* data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plans_->backward, p, p);
}

} // namespace toeplab
