#include "green_solver.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <fftw3.h>

#include "kgl/error.hpp"
#include "kgl/surface_grid.hpp"

namespace kgl {

namespace {

std::vector<double> project_mean_zero(std::span<const double> r, std::span<const double> dA, double V) {
    double mean = 0.0;
    for (std::size_t x = 0; x < r.size(); ++x) mean += r[x] * dA[x];
    mean /= V;
    std::vector<double> out(r.begin(), r.end());
    for (double& v : out) v -= mean;
    return out;
}

void remove_mean(std::vector<double>& u, std::span<const double> dA, double V) {
    double mean = 0.0;
    for (std::size_t x = 0; x < u.size(); ++x) mean += u[x] * dA[x];
    mean /= V;
    for (double& v : u) v -= mean;
}

std::optional<std::filesystem::path> cache_path(const SurfaceGrid& grid) {
    const char* dir = std::getenv("KGL_CACHE_DIR");
    if (!dir || !*dir) return std::nullopt;
    return std::filesystem::path(dir) / grid.cache_key();
}

// Little-endian row-major float64 payload.
bool read_cache(const std::filesystem::path& path, std::vector<double>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::vector<unsigned char> raw(out.size() * 8);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) return false;
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[8 * k + b]) << (8 * b);
        out[k] = std::bit_cast<double>(bits);
    }
    return true;
}

void write_cache(const std::filesystem::path& path, const std::vector<double>& data) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::vector<unsigned char> raw(data.size() * 8);
    for (std::size_t k = 0; k < data.size(); ++k) {
        auto bits = std::bit_cast<std::uint64_t>(data[k]);
        for (int b = 0; b < 8; ++b) raw[8 * k + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    auto tmp = path;
    tmp += ".tmp";
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    out.close();
    std::filesystem::rename(tmp, path, ec);
}

class TorusSolver final : public GreenSolver {
public:
    explicit TorusSolver(const SurfaceGrid& grid) : grid_(grid), n_(grid.side()) {
        const double V = grid.total_volume();
        const double w = static_cast<double>(n_) * n_ / (4.0 * std::numbers::pi * V);
        eig_.resize(static_cast<std::size_t>(n_) * n_);
        for (int l = 0; l < n_; ++l) {
            for (int k = 0; k < n_; ++k) {
                eig_[grid.index(k, l)] = w * (2.0 * std::cos(2.0 * std::numbers::pi * k / n_) +
                                              2.0 * std::cos(2.0 * std::numbers::pi * l / n_) - 4.0);
            }
        }
        base_.resize(eig_.size());
        auto path = cache_path(grid);
        if (path && read_cache(*path, base_)) return;
        // G(x, 0) = (1/V) Σ_{k≠0} e^{2πi k·x/N} / λ_k
        std::vector<std::complex<double>> hat(eig_.size());
        for (std::size_t k = 1; k < eig_.size(); ++k) hat[k] = 1.0 / (V * eig_[k]);
        hat[0] = 0.0;
        transform(hat, FFTW_BACKWARD);
        for (std::size_t k = 0; k < base_.size(); ++k) base_[k] = hat[k].real();
        // Symmetrize against the lattice reflection so G(x,y) = G(y,x) holds bitwise.
        std::vector<double> sym(base_.size());
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i)
                sym[grid.index(i, j)] =
                    0.5 * (base_[grid.index(i, j)] + base_[grid.index((n_ - i) % n_, (n_ - j) % n_)]);
        base_ = std::move(sym);
        remove_mean(base_, grid.area_weights(), V);
        if (path) write_cache(*path, base_);
    }

    std::vector<double> green_column(std::size_t p) const override {
        const int pi = grid_.col(p), pj = grid_.row(p);
        std::vector<double> out(base_.size());
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < n_; ++i)
                out[grid_.index(i, j)] = base_[grid_.index((i - pi + n_) % n_, (j - pj + n_) % n_)];
        return out;
    }

    std::vector<double> solve(std::span<const double> r) const override {
        auto rr = project_mean_zero(r, grid_.area_weights(), grid_.total_volume());
        std::vector<std::complex<double>> hat(rr.begin(), rr.end());
        transform(hat, FFTW_FORWARD);
        hat[0] = 0.0;
        for (std::size_t k = 1; k < hat.size(); ++k) hat[k] /= eig_[k];
        transform(hat, FFTW_BACKWARD);
        const double scale = 1.0 / static_cast<double>(hat.size());
        std::vector<double> u(hat.size());
        for (std::size_t k = 0; k < u.size(); ++k) u[k] = hat[k].real() * scale;
        remove_mean(u, grid_.area_weights(), grid_.total_volume());
        return u;
    }

private:
    void transform(std::vector<std::complex<double>>& data, int sign) const {
        auto* buf = reinterpret_cast<fftw_complex*>(data.data());
        fftw_plan plan = fftw_plan_dft_2d(n_, n_, buf, buf, sign, FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    const SurfaceGrid& grid_;
    int n_;
    std::vector<double> eig_;
    std::vector<double> base_;
};

// Sphere: sparse Cholesky of the flux-form operator dA·Δ, grounded at node 0
// (consistent right-hand sides make the grounded row redundant).
class SphereSolver final : public GreenSolver {
public:
    explicit SphereSolver(const SurfaceGrid& grid) : grid_(grid), m_(grid.node_count()) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(6 * m_);
        for (std::size_t x = 0; x < m_; ++x) {
            if (x == 0) {
                trip.emplace_back(0, 0, 1.0);
                continue;
            }
            double diag = 0.0;
            for (const auto& nb : grid.stencil(x)) {
                const double s = nb.weight * grid.area(x);
                diag += s;
                if (nb.node != 0) trip.emplace_back(static_cast<int>(x), static_cast<int>(nb.node), -s);
            }
            trip.emplace_back(static_cast<int>(x), static_cast<int>(x), diag);
        }
        Eigen::SparseMatrix<double> L(static_cast<int>(m_), static_cast<int>(m_));
        L.setFromTriplets(trip.begin(), trip.end());
        chol_.compute(L);
        if (chol_.info() != Eigen::Success) throw Error(ErrorKind::convergence, "sphere Laplacian factorization failed");
    }

    std::vector<double> green_column(std::size_t p) const override {
        std::vector<double> r(m_, -1.0 / grid_.total_volume());
        r[p] += 1.0 / grid_.area(p);
        return solve(r);
    }

    std::vector<double> solve(std::span<const double> r) const override {
        auto rr = project_mean_zero(r, grid_.area_weights(), grid_.total_volume());
        Eigen::VectorXd b(static_cast<Eigen::Index>(m_));
        for (std::size_t x = 0; x < m_; ++x) b[static_cast<Eigen::Index>(x)] = -grid_.area(x) * rr[x];
        b[0] = 0.0;
        Eigen::VectorXd sol = chol_.solve(b);
        std::vector<double> u(m_);
        for (std::size_t x = 0; x < m_; ++x) u[x] = sol[static_cast<Eigen::Index>(x)];
        remove_mean(u, grid_.area_weights(), grid_.total_volume());
        return u;
    }

private:
    const SurfaceGrid& grid_;
    std::size_t m_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol_;
};

}  // namespace

std::shared_ptr<GreenSolver> make_torus_solver(const SurfaceGrid& grid) {
    return std::make_shared<TorusSolver>(grid);
}

std::shared_ptr<GreenSolver> make_sphere_solver(const SurfaceGrid& grid) {
    return std::make_shared<SphereSolver>(grid);
}

}  // namespace kgl
