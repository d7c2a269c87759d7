#pragma once

#include <string>
#include <vector>

#include "dpiqn/layers.hpp"

namespace dpiqn {

enum class ModelKind { DQN, DRQN, DPIQN, DRPIQN, FPDQN };

const char* to_string(ModelKind k);
bool model_kind_from_string(const std::string& s, ModelKind* out);

struct ConvLayerCfg {
  int filters = 0, kernel = 0, stride = 1;
};

struct ModelSpec {
  ModelKind kind = ModelKind::DQN;
  int n_heads = 0;  // modeled target agents; 0 for baselines
  int action_dim = 5;
  int target_action_dim = 5;
  int input_h = 84, input_w = 84;
  int history = 12;  // stacked frames for feedforward kinds
  std::vector<ConvLayerCfg> convs{{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  int embed_dim = 512;   // h^e
  int branch_dim = 512;  // h^Q and h^PI share this width (fusion requires it)
  int lstm_hidden = 512;

  bool recurrent() const { return kind == ModelKind::DRQN || kind == ModelKind::DRPIQN; }
  bool has_heads() const { return kind == ModelKind::DPIQN || kind == ModelKind::DRPIQN; }
  bool fingerprint() const { return kind == ModelKind::FPDQN; }
  int in_channels() const { return recurrent() ? 1 : history; }
  int trunk_dim() const { return recurrent() ? lstm_hidden : embed_dim; }

  void validate() const {
    if (has_heads()) {
      DPIQN_CHECK(n_heads >= 1, to_string(kind), " requires at least one policy head");
    } else {
      DPIQN_CHECK(n_heads == 0, to_string(kind), " takes no policy heads");
    }
    DPIQN_CHECK(!convs.empty() && embed_dim > 0 && branch_dim > 0, "invalid layer sizes");
    DPIQN_CHECK(!recurrent() || history == 1, "recurrent kinds consume history length 1");
  }
};

template <typename T>
struct ModelOut {
  Tensor<T> q;                            // (N, action_dim)
  std::vector<Tensor<T>> policy_logits;   // per head, (N, target_action_dim)
  std::vector<Tensor<T>> policies;        // softmaxed heads
  LstmState<T> state_out;                 // recurrent kinds
  Tensor<T> h_e, h_q, h_pi, h_c;          // diagnostics when requested
};

struct ForwardOptions {
  bool need_policies = true;
  bool need_cache = false;
  bool diagnostics = false;
  bool force_hpi_ones = false;  // test hook: multiplicative-identity fusion
  bool bypass_fusion = false;   // test hook: route h^Q straight to the output
};

template <typename T>
struct ModelCache {
  std::vector<ConvCache<T>> convs;
  std::vector<ReluCache<T>> conv_relus;
  FcCache<T> fc_e;
  ReluCache<T> relu_e;
  LstmStepCache<T> lstm;
  FcCache<T> fc_q;
  ReluCache<T> relu_q;
  FcCache<T> fc_pi;
  ReluCache<T> relu_pi;
  FcCache<T> fc_out;
  std::vector<FcCache<T>> heads;
  Tensor<T> h_q, h_pi;  // post-relu branch activations for the fusion product
  int batch = 0;
};

template <typename T>
struct ModelSeqCache {
  std::vector<ModelCache<T>> steps;
};

// Assembles DQN / DRQN / DPIQN / DRPIQN / FPDQN from the layer kernel.
// Parameters live outside the model so online and target copies share one
// assembly.
template <typename T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    conv_specs_.clear();
    int c = spec_.in_channels();
    int h = spec_.input_h, w = spec_.input_w;
    for (const auto& l : spec_.convs) {
      ConvSpec cs{c, l.filters, l.kernel, l.kernel, l.stride};
      DPIQN_CHECK(h >= l.kernel && w >= l.kernel, "conv kernel ", l.kernel,
                  " larger than input ", h, "x", w);
      conv_specs_.push_back(cs);
      h = cs.out_h(h);
      w = cs.out_w(w);
      c = l.filters;
    }
    flat_dim_ = c * h * w;
  }

  const ModelSpec& spec() const { return spec_; }
  int flat_dim() const { return flat_dim_; }

  NamedTensors<T> init_params(uint64_t seed) const {
    NamedTensors<T> p;
    for (size_t i = 0; i < conv_specs_.size(); ++i) {
      const auto& cs = conv_specs_[i];
      p.add("conv" + std::to_string(i + 1) + ".w", {cs.out_c, cs.patch()});
      p.add("conv" + std::to_string(i + 1) + ".b", {cs.out_c});
    }
    p.add("fc_e.w", {flat_dim_, spec_.embed_dim});
    p.add("fc_e.b", {spec_.embed_dim});
    if (spec_.recurrent()) {
      p.add("lstm.wx", {spec_.embed_dim, 4 * spec_.lstm_hidden});
      p.add("lstm.wh", {spec_.lstm_hidden, 4 * spec_.lstm_hidden});
      p.add("lstm.b", {4 * spec_.lstm_hidden});
    }
    const int q_in = spec_.trunk_dim() + (spec_.fingerprint() ? 2 : 0);
    p.add("fc_q.w", {q_in, spec_.branch_dim});
    p.add("fc_q.b", {spec_.branch_dim});
    if (spec_.has_heads()) {
      p.add("fc_pi.w", {spec_.trunk_dim(), spec_.branch_dim});
      p.add("fc_pi.b", {spec_.branch_dim});
      for (int i = 0; i < spec_.n_heads; ++i) {
        p.add("head" + std::to_string(i) + ".w", {spec_.branch_dim, spec_.target_action_dim});
        p.add("head" + std::to_string(i) + ".b", {spec_.target_action_dim});
      }
    }
    p.add("fc_out.w", {spec_.branch_dim, spec_.action_dim});
    p.add("fc_out.b", {spec_.action_dim});

    // Uniform fan-in init; LSTM forget-gate bias starts at 1.
    auto fan_in_of = [&](const std::string& name, const Tensor<T>& t) -> int64_t {
      if (name.rfind("conv", 0) == 0) {
        // conv weights are (out_c, patch); patch is the fan-in
        if (name.back() == 'w') return t.shape[1];
        return p.at(name.substr(0, name.size() - 2) + ".w").shape[1];
      }
      if (name == "lstm.b") return spec_.lstm_hidden;
      if (name.back() == 'b') return p.at(name.substr(0, name.size() - 2) + ".w").shape[0];
      return t.shape[0];  // fc-style (in, out) and lstm.wx / lstm.wh
    };
    Rng rng(derive_seed(seed, 0x6d6f64656cull));
    for (size_t t = 0; t < p.size(); ++t) {
      auto& tensor = p.tensors[t];
      const std::string& name = p.names[t];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in_of(name, tensor)));
      for (int64_t i = 0; i < tensor.numel(); ++i)
        tensor[i] = static_cast<T>((2.0 * uniform_real(rng) - 1.0) * bound);
      if (name == "lstm.b") {
        const int hid = spec_.lstm_hidden;
        for (int i = 0; i < hid; ++i) tensor[hid + i] = T(1);
      }
    }
    return p;
  }

  LstmState<T> zero_state(int batch) const {
    return LstmState<T>::zero(batch, spec_.lstm_hidden);
  }

  ModelOut<T> forward(const NamedTensors<T>& params, const Tensor<T>& obs, const Tensor<T>* extra,
                      const LstmState<T>* state_in, const ForwardOptions& opt,
                      ModelCache<T>* cache) const {
    const std::vector<int64_t> want{obs.shape.empty() ? 0 : obs.dim(0), spec_.in_channels(),
                                    spec_.input_h, spec_.input_w};
    DPIQN_CHECK(obs.shape.size() == 4 && obs.shape[1] == want[1] && obs.shape[2] == want[2] &&
                    obs.shape[3] == want[3],
                "model input shape ", shape_str(obs.shape), " expected ", shape_str(want));
    const int n = static_cast<int>(obs.dim(0));
    DPIQN_CHECK(!spec_.recurrent() || state_in != nullptr,
                "recurrent model requires an incoming recurrent state");
    DPIQN_CHECK(!spec_.fingerprint() || (extra && extra->shape == std::vector<int64_t>({n, 2})),
                "fingerprint model requires an (N,2) extra input");

    if (cache) {
      cache->convs.resize(conv_specs_.size());
      cache->conv_relus.resize(conv_specs_.size());
      cache->heads.resize(static_cast<size_t>(spec_.n_heads));
      cache->batch = n;
    }

    Tensor<T> x = obs;
    for (size_t i = 0; i < conv_specs_.size(); ++i) {
      x = conv_forward(conv_specs_[i], x, params.at("conv" + std::to_string(i + 1) + ".w"),
                       params.at("conv" + std::to_string(i + 1) + ".b"),
                       cache ? &cache->convs[i] : nullptr);
      x = relu_forward(x, cache ? &cache->conv_relus[i] : nullptr);
    }
    x.shape = {n, flat_dim_};

    Tensor<T> e_pre = fc_forward(x, params.at("fc_e.w"), params.at("fc_e.b"),
                                 cache ? &cache->fc_e : nullptr);
    Tensor<T> h_e = relu_forward(e_pre, cache ? &cache->relu_e : nullptr);

    ModelOut<T> out;
    Tensor<T> trunk;
    if (spec_.recurrent()) {
      LstmSpec ls{spec_.embed_dim, spec_.lstm_hidden};
      out.state_out = lstm_step(ls, h_e, *state_in, params.at("lstm.wx"), params.at("lstm.wh"),
                                params.at("lstm.b"), cache ? &cache->lstm : nullptr);
      trunk = out.state_out.h;
    } else {
      trunk = h_e;
    }

    Tensor<T> q_in = trunk;
    if (spec_.fingerprint()) {
      q_in = Tensor<T>({n, spec_.trunk_dim() + 2});
      for (int i = 0; i < n; ++i) {
        const T* src = trunk.ptr() + static_cast<int64_t>(i) * spec_.trunk_dim();
        T* dst = q_in.ptr() + static_cast<int64_t>(i) * (spec_.trunk_dim() + 2);
        std::copy(src, src + spec_.trunk_dim(), dst);
        dst[spec_.trunk_dim()] = (*extra)[static_cast<int64_t>(i) * 2];
        dst[spec_.trunk_dim() + 1] = (*extra)[static_cast<int64_t>(i) * 2 + 1];
      }
    }

    Tensor<T> q_pre = fc_forward(q_in, params.at("fc_q.w"), params.at("fc_q.b"),
                                 cache ? &cache->fc_q : nullptr);
    Tensor<T> h_q = relu_forward(q_pre, cache ? &cache->relu_q : nullptr);

    Tensor<T> h_pi, h_c;
    if (spec_.has_heads()) {
      Tensor<T> pi_pre = fc_forward(trunk, params.at("fc_pi.w"), params.at("fc_pi.b"),
                                    cache ? &cache->fc_pi : nullptr);
      h_pi = relu_forward(pi_pre, cache ? &cache->relu_pi : nullptr);
      if (opt.force_hpi_ones) h_pi.fill(T(1));

      h_c = Tensor<T>(h_q.shape);
      for (int64_t i = 0; i < h_q.numel(); ++i) h_c[i] = h_q[i] * h_pi[i];

      const Tensor<T>& out_in = opt.bypass_fusion ? h_q : h_c;
      out.q = fc_forward(out_in, params.at("fc_out.w"), params.at("fc_out.b"),
                         cache ? &cache->fc_out : nullptr);
      if (opt.need_policies) {
        for (int i = 0; i < spec_.n_heads; ++i) {
          Tensor<T> logits =
              fc_forward(h_pi, params.at("head" + std::to_string(i) + ".w"),
                         params.at("head" + std::to_string(i) + ".b"),
                         cache ? &cache->heads[static_cast<size_t>(i)] : nullptr);
          out.policies.push_back(softmax_forward(logits));
          out.policy_logits.push_back(std::move(logits));
        }
      }
      if (cache) {
        cache->h_q = h_q;
        cache->h_pi = h_pi;
      }
    } else {
      out.q = fc_forward(h_q, params.at("fc_out.w"), params.at("fc_out.b"),
                         cache ? &cache->fc_out : nullptr);
    }

    if (opt.diagnostics) {
      out.h_e = h_e;
      out.h_q = h_q;
      out.h_pi = h_pi;
      out.h_c = h_c;
    }
    return out;
  }

  // Backward for one forward call. dq is (N, action_dim); dlogits holds one
  // (N, target_action_dim) gradient per head (empty when headless or when the
  // policy branch is not being trained). Parameter gradients accumulate into
  // `grads`. For recurrent models, grad_h/grad_c carry BPTT state: they are
  // added to this step's incoming gradients and replaced by the gradients for
  // the previous step.
  void backward(const ModelCache<T>& cache, const NamedTensors<T>& params, const Tensor<T>& dq,
                const std::vector<Tensor<T>>& dlogits, NamedTensors<T>& grads,
                Tensor<T>* grad_h = nullptr, Tensor<T>* grad_c = nullptr) const {
    const int n = cache.batch;
    DPIQN_CHECK(n > 0, "backward requires a cache produced with need_cache");

    Tensor<T> d_trunk({n, spec_.trunk_dim()}, T(0));
    Tensor<T> d_hq;

    if (spec_.has_heads()) {
      Tensor<T> d_hc = fc_backward(cache.fc_out, params.at("fc_out.w"), dq,
                                   grads.at("fc_out.w"), grads.at("fc_out.b"));
      d_hq = Tensor<T>(d_hc.shape);
      Tensor<T> d_hpi(d_hc.shape);
      for (int64_t i = 0; i < d_hc.numel(); ++i) {
        d_hq[i] = d_hc[i] * cache.h_pi[i];
        d_hpi[i] = d_hc[i] * cache.h_q[i];
      }
      for (size_t h = 0; h < dlogits.size(); ++h) {
        Tensor<T> d = fc_backward(cache.heads[h], params.at("head" + std::to_string(h) + ".w"),
                                  dlogits[h], grads.at("head" + std::to_string(h) + ".w"),
                                  grads.at("head" + std::to_string(h) + ".b"));
        for (int64_t i = 0; i < d_hpi.numel(); ++i) d_hpi[i] += d[i];
      }
      Tensor<T> d_pi_pre = relu_backward(cache.relu_pi, d_hpi);
      Tensor<T> dt = fc_backward(cache.fc_pi, params.at("fc_pi.w"), d_pi_pre,
                                 grads.at("fc_pi.w"), grads.at("fc_pi.b"));
      for (int64_t i = 0; i < d_trunk.numel(); ++i) d_trunk[i] += dt[i];
    } else {
      d_hq = fc_backward(cache.fc_out, params.at("fc_out.w"), dq, grads.at("fc_out.w"),
                         grads.at("fc_out.b"));
    }

    Tensor<T> d_q_pre = relu_backward(cache.relu_q, d_hq);
    Tensor<T> d_q_in = fc_backward(cache.fc_q, params.at("fc_q.w"), d_q_pre, grads.at("fc_q.w"),
                                   grads.at("fc_q.b"));
    if (spec_.fingerprint()) {
      // drop the two fingerprint columns
      for (int i = 0; i < n; ++i) {
        const T* src = d_q_in.ptr() + static_cast<int64_t>(i) * (spec_.trunk_dim() + 2);
        T* dst = d_trunk.ptr() + static_cast<int64_t>(i) * spec_.trunk_dim();
        for (int j = 0; j < spec_.trunk_dim(); ++j) dst[j] += src[j];
      }
    } else {
      for (int64_t i = 0; i < d_trunk.numel(); ++i) d_trunk[i] += d_q_in[i];
    }

    Tensor<T> d_h_e;
    if (spec_.recurrent()) {
      DPIQN_CHECK(grad_h && grad_c, "recurrent backward needs BPTT carry tensors");
      for (int64_t i = 0; i < d_trunk.numel(); ++i) d_trunk[i] += (*grad_h)[i];
      LstmSpec ls{spec_.embed_dim, spec_.lstm_hidden};
      Tensor<T> dh_prev, dc_prev;
      lstm_step_backward(ls, cache.lstm, params.at("lstm.wx"), params.at("lstm.wh"), d_trunk,
                         *grad_c, grads.at("lstm.wx"), grads.at("lstm.wh"), grads.at("lstm.b"),
                         d_h_e, dh_prev, dc_prev);
      *grad_h = std::move(dh_prev);
      *grad_c = std::move(dc_prev);
    } else {
      d_h_e = std::move(d_trunk);
    }

    Tensor<T> d_e_pre = relu_backward(cache.relu_e, d_h_e);
    Tensor<T> d_flat = fc_backward(cache.fc_e, params.at("fc_e.w"), d_e_pre, grads.at("fc_e.w"),
                                   grads.at("fc_e.b"));

    // back through the conv stack
    const auto& last = conv_specs_.back();
    int oh = spec_.input_h, ow = spec_.input_w;
    std::vector<std::pair<int, int>> dims;  // output dims per conv
    for (const auto& cs : conv_specs_) {
      oh = cs.out_h(oh);
      ow = cs.out_w(ow);
      dims.emplace_back(oh, ow);
    }
    Tensor<T> d = std::move(d_flat);
    d.shape = {n, last.out_c, dims.back().first, dims.back().second};
    for (int i = static_cast<int>(conv_specs_.size()) - 1; i >= 0; --i) {
      d = relu_backward(cache.conv_relus[static_cast<size_t>(i)], d);
      const std::string base = "conv" + std::to_string(i + 1);
      d = conv_backward(conv_specs_[static_cast<size_t>(i)], cache.convs[static_cast<size_t>(i)],
                        params.at(base + ".w"), d, grads.at(base + ".w"), grads.at(base + ".b"),
                        /*skip_grad_input=*/i == 0);
    }
  }

  // Unrolled forward over a sequence of single-frame batches, zero-started.
  std::vector<ModelOut<T>> forward_sequence(const NamedTensors<T>& params,
                                            const std::vector<Tensor<T>>& obs_seq,
                                            const ForwardOptions& opt,
                                            ModelSeqCache<T>* cache) const {
    DPIQN_CHECK(spec_.recurrent(), "forward_sequence is for recurrent kinds");
    DPIQN_CHECK(!obs_seq.empty(), "empty sequence");
    const int n = static_cast<int>(obs_seq.front().dim(0));
    LstmState<T> state = zero_state(n);
    if (cache) cache->steps.resize(obs_seq.size());
    std::vector<ModelOut<T>> outs;
    outs.reserve(obs_seq.size());
    for (size_t t = 0; t < obs_seq.size(); ++t) {
      ModelOut<T> o = forward(params, obs_seq[t], nullptr, &state, opt,
                              cache ? &cache->steps[t] : nullptr);
      state = o.state_out;
      outs.push_back(std::move(o));
    }
    return outs;
  }

  // Full backprop through time over a forward_sequence cache.
  void backward_sequence(const ModelSeqCache<T>& cache, const NamedTensors<T>& params,
                         const std::vector<Tensor<T>>& dq_seq,
                         const std::vector<std::vector<Tensor<T>>>& dlogits_seq,
                         NamedTensors<T>& grads) const {
    DPIQN_CHECK(cache.steps.size() == dq_seq.size(), "sequence cache/gradient length mismatch");
    const int n = cache.steps.front().batch;
    Tensor<T> gh({n, spec_.lstm_hidden}, T(0));
    Tensor<T> gc({n, spec_.lstm_hidden}, T(0));
    for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
      backward(cache.steps[static_cast<size_t>(t)], params, dq_seq[static_cast<size_t>(t)],
               dlogits_seq.empty() ? std::vector<Tensor<T>>{} : dlogits_seq[static_cast<size_t>(t)],
               grads, &gh, &gc);
    }
  }

 private:
  ModelSpec spec_;
  std::vector<ConvSpec> conv_specs_;
  int flat_dim_ = 0;
};

// Deep copy used for the periodically synced target network.
inline ParamSet sync_target(const ParamSet& online) { return online; }

}  // namespace dpiqn
