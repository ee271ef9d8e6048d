#include "kgl/surface_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "green_solver.hpp"
#include "kgl/error.hpp"

namespace kgl {

const char* to_string(SurfaceKind kind) {
    return kind == SurfaceKind::torus ? "torus" : "sphere";
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_grid: return "invalid-grid";
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::unsupported_singularity: return "unsupported-singularity";
        case ErrorKind::mass_mismatch: return "mass-mismatch";
        case ErrorKind::resolution: return "resolution";
        case ErrorKind::unbounded_potential: return "unbounded-potential";
        case ErrorKind::empty_domain: return "empty-domain";
        case ErrorKind::hypothesis_violation: return "hypothesis-violation";
        case ErrorKind::invalid_shift: return "invalid-shift";
        case ErrorKind::out_of_scope: return "out-of-scope";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::schedule_exhausted: return "schedule-exhausted";
        case ErrorKind::window_too_small: return "window-too-small";
        case ErrorKind::io: return "io";
        case ErrorKind::usage: return "usage";
    }
    return "error";
}

namespace {

constexpr double four_pi = 4.0 * std::numbers::pi;

void check_side(int N) {
    if (N < 8) throw Error(ErrorKind::invalid_grid, "side count must be at least 8, got " + std::to_string(N));
}

}  // namespace

SurfaceGrid::~SurfaceGrid() = default;

void SurfaceGrid::add_edge(std::vector<std::vector<Neighbour>>& adj, std::size_t a, std::size_t b, double flux) {
    // flux: conformal conductance (cross-section / length); the stencil weight
    // divides by 4π dA of the node it belongs to.
    adj[a].push_back({static_cast<std::uint32_t>(b), flux / (four_pi * area_[a])});
    adj[b].push_back({static_cast<std::uint32_t>(a), flux / (four_pi * area_[b])});
}

void SurfaceGrid::finalize(std::vector<std::vector<Neighbour>>& adj) {
    offset_.assign(adj.size() + 1, 0);
    stencil_.clear();
    for (std::size_t x = 0; x < adj.size(); ++x) {
        std::sort(adj[x].begin(), adj[x].end(), [](const Neighbour& a, const Neighbour& b) { return a.node < b.node; });
        stencil_.insert(stencil_.end(), adj[x].begin(), adj[x].end());
        offset_[x + 1] = stencil_.size();
    }
}

std::shared_ptr<const SurfaceGrid> SurfaceGrid::torus(int N, double V) {
    check_side(N);
    if (!(V > 0.0) || !std::isfinite(V)) throw Error(ErrorKind::invalid_grid, "volume must be positive");
    std::shared_ptr<SurfaceGrid> g(new SurfaceGrid());
    g->kind_ = SurfaceKind::torus;
    g->n_ = N;
    g->m_ = N;
    g->volume_ = V;
    g->step_ = 1.0 / N;
    const std::size_t n = static_cast<std::size_t>(N) * N;
    g->coord_.resize(n);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) g->coord_[g->index(i, j)] = {static_cast<double>(i) / N, static_cast<double>(j) / N};
    g->area_.assign(n, V / (static_cast<double>(N) * N));
    g->density_.assign(n, V);
    std::vector<std::vector<Neighbour>> adj(n);
    for (int j = 0; j < N; ++j) {
        for (int i = 0; i < N; ++i) {
            g->add_edge(adj, g->index(i, j), g->index((i + 1) % N, j), 1.0);
            g->add_edge(adj, g->index(i, j), g->index(i, (j + 1) % N), 1.0);
        }
    }
    g->finalize(adj);
    return g;
}

std::shared_ptr<const SurfaceGrid> SurfaceGrid::sphere(int N) {
    check_side(N);
    std::shared_ptr<SurfaceGrid> g(new SurfaceGrid());
    g->kind_ = SurfaceKind::sphere_chart;
    g->n_ = N;
    const double h = 2.0 * std::numbers::pi / N;
    const int half = static_cast<int>(std::ceil((std::numbers::pi + 2.0 * std::max(0.0, std::log(N / 32.0))) / h - 1e-9));
    const int M = 2 * half;
    const double S = half * h;
    g->m_ = M;
    g->step_ = h;
    const std::size_t m = static_cast<std::size_t>(N) * M;
    const std::size_t origin = m, infinity = m + 1;
    g->coord_.resize(m + 2);
    g->area_.resize(m + 2);
    g->density_.resize(m + 2);
    // Fubini–Study area of {s_a < log|z| < s_b} per unit angle
    auto band = [](double sa, double sb) {
        return (1.0 / (1.0 + std::exp(2.0 * sa)) - 1.0 / (1.0 + std::exp(2.0 * sb))) / (2.0 * std::numbers::pi);
    };
    for (int i = 0; i < M; ++i) {
        const double s = -S + (i + 0.5) * h;
        const double a = band(-S + i * h, -S + (i + 1) * h) * h;
        for (int j = 0; j < N; ++j) {
            const std::size_t x = g->index(i, j);
            const auto z = std::polar(std::exp(s), j * h);
            g->coord_[x] = z;
            g->area_[x] = a;
            const double q = 1.0 + std::norm(z);
            g->density_[x] = 1.0 / (std::numbers::pi * q * q);
        }
    }
    const double cap = 1.0 / (1.0 + std::exp(2.0 * S));
    g->area_[origin] = cap;
    g->area_[infinity] = cap;
    g->coord_[origin] = {0.0, 0.0};
    g->coord_[infinity] = {INFINITY, INFINITY};
    g->density_[origin] = 1.0 / std::numbers::pi;
    g->density_[infinity] = 0.0;

    std::vector<std::vector<Neighbour>> adj(m + 2);
    for (int j = 0; j < N; ++j) {
        for (int i = 0; i < M; ++i) {
            const std::size_t x = g->index(i, j);
            g->add_edge(adj, x, g->index(i, (j + 1) % N), 2.0 / 3.0);
            if (i + 1 == M) continue;
            g->add_edge(adj, x, g->index(i + 1, j), 2.0 / 3.0);
            g->add_edge(adj, x, g->index(i + 1, (j + 1) % N), 1.0 / 6.0);
            g->add_edge(adj, x, g->index(i + 1, (j + N - 1) % N), 1.0 / 6.0);
        }
    }
    // Cap links carry the exact face flux of the first angular mode r cos(φ - φ_j),
    // the dominant variation of a smooth field across a cap: h (r_face / r_ring).
    const double cap_flux = h * std::exp(-h / 2.0);
    for (int j = 0; j < N; ++j) {
        g->add_edge(adj, origin, g->index(0, j), cap_flux);
        g->add_edge(adj, infinity, g->index(M - 1, j), cap_flux);
    }
    g->finalize(adj);
    double V = 0.0;
    for (double a : g->area_) V += a;
    g->volume_ = V;
    return g;
}

std::optional<std::size_t> SurfaceGrid::infinity_node() const {
    if (kind_ == SurfaceKind::sphere_chart) return lattice_count() + 1;
    return std::nullopt;
}

std::optional<std::size_t> SurfaceGrid::origin_node() const {
    if (kind_ == SurfaceKind::sphere_chart) return lattice_count();
    return std::nullopt;
}

double SurfaceGrid::laplacian_at(std::span<const double> u, std::size_t x) const {
    const double ux = u[x];
    double acc = 0.0;
    for (const auto& nb : stencil(x)) acc += nb.weight * (u[nb.node] - ux);
    return acc;
}

std::vector<double> SurfaceGrid::laplacian(std::span<const double> u) const {
    std::vector<double> out(node_count(), 0.0);
    for (std::size_t x = 0; x < node_count(); ++x) out[x] = laplacian_at(u, x);
    return out;
}

bool SurfaceGrid::chart_gradient_sq(std::span<const double> f, std::size_t x, double& out) const {
    if (!is_lattice(x)) return false;
    const int i = col(x), j = row(x), N = n_;
    std::size_t ip, im;
    if (kind_ == SurfaceKind::torus) {
        ip = index((i + 1) % N, j);
        im = index((i + N - 1) % N, j);
    } else {
        if (i == 0 || i == m_ - 1) return false;
        ip = index(i + 1, j);
        im = index(i - 1, j);
    }
    const std::size_t jp = index(i, (j + 1) % N), jm = index(i, (j + N - 1) % N);
    for (std::size_t y : {x, ip, im, jp, jm})
        if (!std::isfinite(f[y])) return false;
    const double fa = (f[ip] - f[im]) / (2.0 * step_);
    const double fb = (f[jp] - f[jm]) / (2.0 * step_);
    out = fa * fa + fb * fb;
    // log-polar lattice: |∂_z f| = |∂_w f| / |z|
    if (kind_ == SurfaceKind::sphere_chart) out /= std::norm(coord_[x]);
    return true;
}

double SurfaceGrid::hma_coefficient(std::size_t x) const { return std::numbers::pi * density_[x]; }

int SurfaceGrid::ring_distance(std::size_t a, std::size_t b) const {
    if (a == b) return 0;
    if (kind_ == SurfaceKind::torus) {
        int di = std::abs(col(a) - col(b));
        int dj = std::abs(row(a) - row(b));
        di = std::min(di, n_ - di);
        dj = std::min(dj, n_ - dj);
        return std::max(di, dj);
    }
    auto radial = [&](std::size_t x) { return is_lattice(x) ? col(x) : (x == lattice_count() ? -1 : m_); };
    const int ra = radial(a), rb = radial(b);
    if (!is_lattice(a) || !is_lattice(b)) return std::abs(ra - rb);
    int dj = std::abs(row(a) - row(b));
    dj = std::min(dj, n_ - dj);
    return std::max(std::abs(ra - rb), dj);
}

std::vector<std::size_t> SurfaceGrid::neighbourhood(std::size_t x, int rings) const {
    std::vector<std::size_t> out;
    const int N = n_;
    if (rings <= 0) return {x};
    if (kind_ == SurfaceKind::torus) {
        const int i0 = col(x), j0 = row(x);
        const int r = std::min(rings, (N - 1) / 2);
        for (int dj = -r; dj <= r; ++dj)
            for (int di = -r; di <= r; ++di) out.push_back(index((i0 + di + N) % N, (j0 + dj + N) % N));
    } else if (!is_lattice(x)) {
        out.push_back(x);
        const bool origin = x == lattice_count();
        for (int k = 0; k < std::min(rings, m_); ++k)
            for (int j = 0; j < N; ++j) out.push_back(index(origin ? k : m_ - 1 - k, j));
        if (rings > m_) out.push_back(origin ? lattice_count() + 1 : lattice_count());
    } else {
        const int i0 = col(x), j0 = row(x);
        const int r = std::min(rings, (N - 1) / 2);
        for (int di = -rings; di <= rings; ++di) {
            const int i = i0 + di;
            if (i < 0 || i >= m_) continue;
            for (int dj = -r; dj <= r; ++dj) out.push_back(index(i, (j0 + dj + N) % N));
        }
        if (i0 - rings < 0) out.push_back(lattice_count());
        if (i0 + rings >= m_) out.push_back(lattice_count() + 1);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t SurfaceGrid::nearest_node(std::complex<double> z) const {
    const int N = n_;
    if (kind_ == SurfaceKind::torus) {
        auto wrap = [&](double v) {
            long k = std::lround(v * N);
            k %= N;
            if (k < 0) k += N;
            return static_cast<int>(k);
        };
        return index(wrap(z.real()), wrap(z.imag()));
    }
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return lattice_count() + 1;
    if (z == 0.0) return lattice_count();
    const double S = 0.5 * m_ * step_;
    const double s = std::log(std::abs(z));
    if (s < -S) return lattice_count();
    if (s > S) return lattice_count() + 1;
    int i = static_cast<int>(std::floor((s + S) / step_));
    i = std::clamp(i, 0, m_ - 1);
    double phi = std::arg(z);
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    int j = static_cast<int>(std::lround(phi / step_)) % N;
    return index(i, j);
}

const GreenSolver& SurfaceGrid::solver() const {
    std::call_once(solver_once_, [this] {
        solver_ = kind_ == SurfaceKind::torus ? make_torus_solver(*this) : make_sphere_solver(*this);
    });
    return *solver_;
}

std::vector<double> SurfaceGrid::green_function(std::size_t p) const {
    if (p >= node_count()) throw Error(ErrorKind::invalid_argument, "node index out of range");
    if (is_infinity(p)) throw Error(ErrorKind::unsupported_singularity, "Green function at the infinity node");
    return solver().green_column(p);
}

std::vector<double> SurfaceGrid::solve_poisson(std::span<const double> r) const {
    if (r.size() != node_count()) throw Error(ErrorKind::invalid_argument, "field size does not match grid");
    return solver().solve(r);
}

nlohmann::json SurfaceGrid::descriptor() const {
    double V = kind_ == SurfaceKind::torus ? volume_ : 1.0;
    return {{"kind", to_string(kind_)}, {"N", n_}, {"V", V}};
}

std::string SurfaceGrid::cache_key() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "green_%s_N%d_V%.17g.bin", to_string(kind_), n_,
                  kind_ == SurfaceKind::torus ? volume_ : 1.0);
    return buf;
}

}  // namespace kgl
