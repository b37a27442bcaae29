#include "mergesim/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "mergesim/rng.hpp"

namespace mergesim {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

Linear init_linear(int out, int in, double scale, RngStream& rng) {
    Linear lin;
    lin.W = Mat::zeros(out, in);
    lin.b.assign(out, 0.0);
    double bound = scale * std::sqrt(6.0 / (in + out));
    for (double& w : lin.W.w) w = rng.uniform(-bound, bound);
    return lin;
}

void linear_forward(const Linear& lin, const Vec& x, Vec& out) {
    out.assign(lin.b.begin(), lin.b.end());
    for (int r = 0; r < lin.W.rows; ++r) {
        const double* row = lin.W.w.data() + static_cast<std::size_t>(r) * lin.W.cols;
        double acc = 0.0;
        for (int c = 0; c < lin.W.cols; ++c) acc += row[c] * x[c];
        out[r] += acc;
    }
}

// dz through a linear layer; dinput accumulates so several heads can feed
// the same trunk activation.
void linear_backward(const Linear& lin, const Vec& input, const Vec& dz, Linear& grad,
                     Vec* dinput) {
    for (int r = 0; r < lin.W.rows; ++r) {
        double* grow = grad.W.w.data() + static_cast<std::size_t>(r) * lin.W.cols;
        const double g = dz[r];
        for (int c = 0; c < lin.W.cols; ++c) grow[c] += g * input[c];
        grad.b[r] += g;
    }
    if (dinput) {
        for (int r = 0; r < lin.W.rows; ++r) {
            const double* row =
                lin.W.w.data() + static_cast<std::size_t>(r) * lin.W.cols;
            const double g = dz[r];
            for (int c = 0; c < lin.W.cols; ++c) (*dinput)[c] += g * row[c];
        }
    }
}

// Forward through a stack; acts receives [input, tanh activations...].
void stack_forward(const Mlp& mlp, std::span<const double> input, Vec& out,
                   std::vector<Vec>* acts) {
    Vec h(input.begin(), input.end());
    if (acts) {
        acts->clear();
        acts->push_back(h);
    }
    Vec z;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        linear_forward(mlp.layers[l], h, z);
        if (l + 1 < mlp.layers.size()) {
            for (double& v : z) v = std::tanh(v);
            h = z;
            if (acts) acts->push_back(h);
        } else {
            out = z;
        }
    }
}

// Backward from d(output) of the final linear layer down the tanh stack.
void stack_backward(const Mlp& mlp, const std::vector<Vec>& acts, const Vec& dout,
                    Mlp& grad) {
    std::size_t last = mlp.layers.size() - 1;
    Vec da(acts[last].size(), 0.0);
    linear_backward(mlp.layers[last], acts[last], dout, grad.layers[last],
                    last > 0 ? &da : nullptr);
    for (std::size_t l = last; l-- > 0;) {
        Vec dz(acts[l + 1].size());
        for (std::size_t i = 0; i < dz.size(); ++i)
            dz[i] = da[i] * (1.0 - acts[l + 1][i] * acts[l + 1][i]);
        Vec dprev(acts[l].size(), 0.0);
        linear_backward(mlp.layers[l], acts[l], dz, grad.layers[l],
                        l > 0 ? &dprev : nullptr);
        da = std::move(dprev);
    }
}

Mlp zeros_like(const Mlp& m) {
    Mlp z;
    z.layers.reserve(m.layers.size());
    for (const auto& lin : m.layers) {
        Linear zl;
        zl.W = Mat::zeros(lin.W.rows, lin.W.cols);
        zl.b.assign(lin.b.size(), 0.0);
        z.layers.push_back(std::move(zl));
    }
    return z;
}

}  // namespace

PolicyParams PolicyParams::standard(int input_dim, int action_dim, bool share_layers,
                                    std::uint64_t seed) {
    return init({input_dim, 100, 50, 25, action_dim}, share_layers, seed);
}

PolicyParams PolicyParams::init(std::vector<int> layer_sizes, bool share_layers,
                                std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("policy needs at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
    PolicyParams p;
    p.layer_sizes = std::move(layer_sizes);
    p.value_share_layers = share_layers;
    RngStream rng = RngStream::derive(seed, 0x6d6c70ULL);
    for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
        bool output = l + 2 == p.layer_sizes.size();
        p.actor.layers.push_back(init_linear(p.layer_sizes[l + 1], p.layer_sizes[l],
                                             output ? 0.01 : 1.0, rng));
    }
    p.log_std.assign(p.layer_sizes.back(), 0.0);
    if (share_layers) {
        int last_hidden = p.layer_sizes[p.layer_sizes.size() - 2];
        p.critic.layers.push_back(init_linear(1, last_hidden, 1.0, rng));
    } else {
        for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
            bool output = l + 2 == p.layer_sizes.size();
            int out = output ? 1 : p.layer_sizes[l + 1];
            p.critic.layers.push_back(
                init_linear(out, p.layer_sizes[l], output ? 1.0 : 1.0, rng));
        }
    }
    return p;
}

PolicyParams PolicyParams::zeros_like() const {
    PolicyParams z;
    z.layer_sizes = layer_sizes;
    z.value_share_layers = value_share_layers;
    z.actor = mergesim::zeros_like(actor);
    z.log_std.assign(log_std.size(), 0.0);
    z.critic = mergesim::zeros_like(critic);
    return z;
}

std::size_t PolicyParams::param_count() const {
    std::size_t n = log_std.size();
    for (const auto& m : {&actor, &critic})
        for (const auto& lin : m->layers) n += lin.W.w.size() + lin.b.size();
    return n;
}

void for_each_param(PolicyParams& p, const std::function<void(double&)>& fn) {
    for (auto& lin : p.actor.layers) {
        for (double& w : lin.W.w) fn(w);
        for (double& b : lin.b) fn(b);
    }
    for (double& s : p.log_std) fn(s);
    for (auto& lin : p.critic.layers) {
        for (double& w : lin.W.w) fn(w);
        for (double& b : lin.b) fn(b);
    }
}

void for_each_param_pair(PolicyParams& a, const PolicyParams& b,
                         const std::function<void(double&, double)>& fn) {
    auto zip_layers = [&](std::vector<Linear>& la, const std::vector<Linear>& lb) {
        for (std::size_t l = 0; l < la.size(); ++l) {
            for (std::size_t i = 0; i < la[l].W.w.size(); ++i)
                fn(la[l].W.w[i], lb[l].W.w[i]);
            for (std::size_t i = 0; i < la[l].b.size(); ++i)
                fn(la[l].b[i], lb[l].b[i]);
        }
    };
    zip_layers(a.actor.layers, b.actor.layers);
    for (std::size_t i = 0; i < a.log_std.size(); ++i) fn(a.log_std[i], b.log_std[i]);
    zip_layers(a.critic.layers, b.critic.layers);
}

void mlp_forward(const PolicyParams& p, std::span<const double> obs, Vec& action_mean,
                 double& value, ForwardCache* cache) {
    if (static_cast<int>(obs.size()) != p.input_dim())
        throw std::invalid_argument("observation dim " + std::to_string(obs.size()) +
                                    " does not match policy input dim " +
                                    std::to_string(p.input_dim()));
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    stack_forward(p.actor, obs, action_mean, &c.actor_acts);
    if (p.value_share_layers) {
        Vec v;
        linear_forward(p.critic.layers.front(), c.actor_acts.back(), v);
        value = v.front();
        c.critic_acts.clear();
    } else {
        Vec v;
        stack_forward(p.critic, obs, v, &c.critic_acts);
        value = v.front();
    }
}

void policy_backward(const PolicyParams& p, const ForwardCache& cache,
                     std::span<const double> dmean, double dvalue,
                     PolicyParams& grad) {
    if (p.value_share_layers) {
        // both heads feed the shared trunk's last activation
        std::size_t last = p.actor.layers.size() - 1;
        Vec da(cache.actor_acts[last].size(), 0.0);
        Vec dmu(dmean.begin(), dmean.end());
        linear_backward(p.actor.layers[last], cache.actor_acts[last], dmu,
                        grad.actor.layers[last], &da);
        Vec dv{dvalue};
        linear_backward(p.critic.layers.front(), cache.actor_acts[last], dv,
                        grad.critic.layers.front(), &da);
        for (std::size_t l = last; l-- > 0;) {
            Vec dz(cache.actor_acts[l + 1].size());
            for (std::size_t i = 0; i < dz.size(); ++i)
                dz[i] = da[i] *
                        (1.0 - cache.actor_acts[l + 1][i] * cache.actor_acts[l + 1][i]);
            Vec dprev(cache.actor_acts[l].size(), 0.0);
            linear_backward(p.actor.layers[l], cache.actor_acts[l], dz,
                            grad.actor.layers[l], l > 0 ? &dprev : nullptr);
            da = std::move(dprev);
        }
    } else {
        Vec dmu(dmean.begin(), dmean.end());
        stack_backward(p.actor, cache.actor_acts, dmu, grad.actor);
        Vec dv{dvalue};
        stack_backward(p.critic, cache.critic_acts, dv, grad.critic);
    }
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
    double lp = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
        double sigma = std::exp(log_std[j]);
        double z = (action[j] - mean[j]) / sigma;
        lp += -0.5 * z * z - log_std[j] - 0.5 * kLog2Pi;
    }
    return lp;
}

void sample_action(const PolicyParams& p, std::span<const double> obs, RngStream& rng,
                   Vec& action, double& log_prob) {
    Vec mean;
    double value;
    mlp_forward(p, obs, mean, value);
    action.resize(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j)
        action[j] = mean[j] + std::exp(p.log_std[j]) * rng.gaussian();
    log_prob = gaussian_log_prob(mean, p.log_std, action);
}

namespace {

constexpr char kMagic[4] = {'M', 'S', 'P', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, std::int64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    std::span<const char> data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size())
            throw std::runtime_error("policy blob truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    std::int64_t i64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i]))
                 << (8 * i);
        pos += 8;
        return static_cast<std::int64_t>(v);
    }
    double f64() {
        std::uint64_t bits = static_cast<std::uint64_t>(i64());
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

void put_mlp(std::string& out, const Mlp& m) {
    for (const auto& lin : m.layers) {
        for (double w : lin.W.w) put_f64(out, w);
        for (double b : lin.b) put_f64(out, b);
    }
}

void read_mlp(Reader& r, Mlp& m) {
    for (auto& lin : m.layers) {
        for (double& w : lin.W.w) w = r.f64();
        for (double& b : lin.b) b = r.f64();
    }
}

}  // namespace

std::string save_params(const PolicyParams& p) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, p.value_share_layers ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(p.layer_sizes.size()));
    for (int s : p.layer_sizes) put_i64(out, s);
    put_mlp(out, p.actor);
    for (double s : p.log_std) put_f64(out, s);
    put_mlp(out, p.critic);
    return out;
}

PolicyParams load_params(std::span<const char> blob) {
    Reader r{blob};
    r.need(4);
    if (std::memcmp(blob.data(), kMagic, 4) != 0)
        throw std::runtime_error("not a policy blob (bad magic)");
    r.pos = 4;
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("unsupported policy blob version " +
                                 std::to_string(version));
    bool share = (r.u32() & 1) != 0;
    std::uint32_t n_sizes = r.u32();
    if (n_sizes < 2 || n_sizes > 64)
        throw std::runtime_error("policy blob has invalid layer count");
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) {
        std::int64_t v = r.i64();
        if (v <= 0 || v > (1 << 20))
            throw std::runtime_error("policy blob has invalid layer size");
        s = static_cast<int>(v);
    }
    PolicyParams p = PolicyParams::init(sizes, share, 0);
    read_mlp(r, p.actor);
    for (double& s : p.log_std) s = r.f64();
    read_mlp(r, p.critic);
    if (r.pos != blob.size())
        throw std::runtime_error("policy blob has trailing bytes");
    return p;
}

void save_params_file(const PolicyParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    std::string blob = save_params(p);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

PolicyParams load_params_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string blob = buf.str();
    return load_params(std::span<const char>(blob.data(), blob.size()));
}

}  // namespace mergesim
