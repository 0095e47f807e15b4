#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "psnet/tensor.hpp"

namespace psnet {

namespace detail {

// Zero-padded copy of a CxHxW block; p == 0 returns the input unchanged.
template <class S>
std::vector<S> pad_chw(const S* x, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t p) {
    const std::int64_t Hp = H + 2 * p;
    const std::int64_t Wp = W + 2 * p;
    std::vector<S> out(static_cast<std::size_t>(C * Hp * Wp), S(0));
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t h = 0; h < H; ++h) {
            const S* src = x + (c * H + h) * W;
            S* dst = out.data() + (c * Hp + h + p) * Wp + p;
            std::copy(src, src + W, dst);
        }
    }
    return out;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

// Cross-correlation of a CxHxW input with OxCxKHxKW filters.
// Output spatial size: floor((H + 2p - d*(k-1) - 1) / stride) + 1.
template <class S>
TensorPtrT<S> conv2d(const TensorPtrT<S>& x, const TensorPtrT<S>& w, const TensorPtrT<S>& b,
                     std::int64_t stride = 1, std::int64_t padding = 0, std::int64_t dilation = 1) {
    detail::require(x->shape.size() == 3, "conv2d: input must be CxHxW, got " + shape_str(x->shape));
    detail::require(w->shape.size() == 4, "conv2d: weights must be OxCxKHxKW, got " + shape_str(w->shape));
    detail::require(stride >= 1 && dilation >= 1 && padding >= 0, "conv2d: bad stride/padding/dilation");

    const std::int64_t C_in = x->shape[0], H = x->shape[1], W = x->shape[2];
    const std::int64_t C_out = w->shape[0], KH = w->shape[2], KW = w->shape[3];
    detail::require(w->shape[1] == C_in, "conv2d: input has " + std::to_string(C_in) + " channels but weights expect " +
                                             std::to_string(w->shape[1]));
    detail::require(!b || b->shape == std::vector<std::int64_t>{C_out}, "conv2d: bias must have shape [C_out]");

    const std::int64_t H_out = (H + 2 * padding - dilation * (KH - 1) - 1) / stride + 1;
    const std::int64_t W_out = (W + 2 * padding - dilation * (KW - 1) - 1) / stride + 1;
    detail::require(H + 2 * padding >= dilation * (KH - 1) + 1 && W + 2 * padding >= dilation * (KW - 1) + 1 &&
                        H_out >= 1 && W_out >= 1,
                    "conv2d: kernel does not fit input (output would be empty)");

    auto out = TensorT<S>::zeros({C_out, H_out, W_out});

    const std::int64_t Hp = H + 2 * padding, Wp = W + 2 * padding;
    std::vector<S> padded;
    const S* xp = x->data.data();
    if (padding > 0) {
        padded = detail::pad_chw(x->data.data(), C_in, H, W, padding);
        xp = padded.data();
    }

    const S* wd = w->data.data();
    S* od = out->data.data();
    for (std::int64_t co = 0; co < C_out; ++co) {
        S* out_plane = od + co * H_out * W_out;
        if (b) {
            std::fill(out_plane, out_plane + H_out * W_out, b->data[co]);
        }
        for (std::int64_t ci = 0; ci < C_in; ++ci) {
            const S* in_plane = xp + ci * Hp * Wp;
            const S* w_plane = wd + (co * C_in + ci) * KH * KW;
            for (std::int64_t kh = 0; kh < KH; ++kh) {
                for (std::int64_t kw = 0; kw < KW; ++kw) {
                    const S wv = w_plane[kh * KW + kw];
                    for (std::int64_t ho = 0; ho < H_out; ++ho) {
                        const S* src = in_plane + (ho * stride + kh * dilation) * Wp + kw * dilation;
                        S* dst = out_plane + ho * W_out;
                        if (stride == 1) {
                            for (std::int64_t wo = 0; wo < W_out; ++wo) {
                                dst[wo] += wv * src[wo];
                            }
                        } else {
                            for (std::int64_t wo = 0; wo < W_out; ++wo) {
                                dst[wo] += wv * src[wo * stride];
                            }
                        }
                    }
                }
            }
        }
    }

    record_op(out, b ? std::vector<TensorPtrT<S>>{x, w, b} : std::vector<TensorPtrT<S>>{x, w},
              [x, w, b, out_w = std::weak_ptr<TensorT<S>>(out), stride, padding, dilation, H_out, W_out]() {
                  auto out_sp = out_w.lock();
                  if (!out_sp) {
                      return;
                  }
                  const std::int64_t C_in = x->shape[0], H = x->shape[1], W = x->shape[2];
                  const std::int64_t C_out = w->shape[0], KH = w->shape[2], KW = w->shape[3];
                  const std::int64_t Hp = H + 2 * padding, Wp = W + 2 * padding;
                  const S* go = out_sp->grad.data();

                  if (b && b->requires_grad) {
                      std::vector<S> db(static_cast<std::size_t>(C_out), S(0));
                      for (std::int64_t co = 0; co < C_out; ++co) {
                          S acc = S(0);
                          const S* g_plane = go + co * H_out * W_out;
                          for (std::int64_t i = 0; i < H_out * W_out; ++i) {
                              acc += g_plane[i];
                          }
                          db[co] = acc;
                      }
                      b->accumulate_grad(db);
                  }

                  std::vector<S> padded;
                  const S* xp = nullptr;
                  if (w->requires_grad) {
                      if (padding > 0) {
                          padded = detail::pad_chw(x->data.data(), C_in, H, W, padding);
                          xp = padded.data();
                      } else {
                          xp = x->data.data();
                      }
                      std::vector<S> dw(w->data.size(), S(0));
                      for (std::int64_t co = 0; co < C_out; ++co) {
                          const S* g_plane = go + co * H_out * W_out;
                          for (std::int64_t ci = 0; ci < C_in; ++ci) {
                              const S* in_plane = xp + ci * Hp * Wp;
                              S* dw_plane = dw.data() + (co * C_in + ci) * KH * KW;
                              for (std::int64_t kh = 0; kh < KH; ++kh) {
                                  for (std::int64_t kw = 0; kw < KW; ++kw) {
                                      S acc = S(0);
                                      for (std::int64_t ho = 0; ho < H_out; ++ho) {
                                          const S* src = in_plane + (ho * stride + kh * dilation) * Wp + kw * dilation;
                                          const S* g_row = g_plane + ho * W_out;
                                          if (stride == 1) {
                                              for (std::int64_t wo = 0; wo < W_out; ++wo) {
                                                  acc += g_row[wo] * src[wo];
                                              }
                                          } else {
                                              for (std::int64_t wo = 0; wo < W_out; ++wo) {
                                                  acc += g_row[wo] * src[wo * stride];
                                              }
                                          }
                                      }
                                      dw_plane[kh * KW + kw] += acc;
                                  }
                              }
                          }
                      }
                      w->accumulate_grad(dw);
                  }

                  if (x->requires_grad) {
                      std::vector<S> dxp(static_cast<std::size_t>(C_in * Hp * Wp), S(0));
                      const S* wd = w->data.data();
                      for (std::int64_t co = 0; co < C_out; ++co) {
                          const S* g_plane = go + co * H_out * W_out;
                          for (std::int64_t ci = 0; ci < C_in; ++ci) {
                              S* dx_plane = dxp.data() + ci * Hp * Wp;
                              const S* w_plane = wd + (co * C_in + ci) * KH * KW;
                              for (std::int64_t kh = 0; kh < KH; ++kh) {
                                  for (std::int64_t kw = 0; kw < KW; ++kw) {
                                      const S wv = w_plane[kh * KW + kw];
                                      for (std::int64_t ho = 0; ho < H_out; ++ho) {
                                          S* dst = dx_plane + (ho * stride + kh * dilation) * Wp + kw * dilation;
                                          const S* g_row = g_plane + ho * W_out;
                                          if (stride == 1) {
                                              for (std::int64_t wo = 0; wo < W_out; ++wo) {
                                                  dst[wo] += wv * g_row[wo];
                                              }
                                          } else {
                                              for (std::int64_t wo = 0; wo < W_out; ++wo) {
                                                  dst[wo * stride] += wv * g_row[wo];
                                              }
                                          }
                                      }
                                  }
                              }
                          }
                      }
                      // Strip padding back off.
                      x->ensure_grad();
                      for (std::int64_t ci = 0; ci < C_in; ++ci) {
                          for (std::int64_t h = 0; h < H; ++h) {
                              const S* src = dxp.data() + (ci * Hp + h + padding) * Wp + padding;
                              S* dst = x->grad.data() + (ci * H + h) * W;
                              for (std::int64_t i = 0; i < W; ++i) {
                                  dst[i] += src[i];
                              }
                          }
                      }
                  }
              });
    return out;
}

// ---------------------------------------------------------------------------
// Pooling and reductions
// ---------------------------------------------------------------------------

// 2x2 max pooling with stride 2. Gradient is routed to the first-scanned
// (row-major) maximum of each window.
template <class S>
TensorPtrT<S> maxpool2(const TensorPtrT<S>& x) {
    detail::require(x->shape.size() == 3, "maxpool2: input must be CxHxW");
    const std::int64_t C = x->shape[0], H = x->shape[1], W = x->shape[2];
    detail::require(H % 2 == 0 && W % 2 == 0,
                    "maxpool2: spatial size must be even, got " + std::to_string(H) + "x" + std::to_string(W));

    const std::int64_t Ho = H / 2, Wo = W / 2;
    auto out = TensorT<S>::zeros({C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(C * Ho * Wo));

    const S* xd = x->data.data();
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t ho = 0; ho < Ho; ++ho) {
            for (std::int64_t wo = 0; wo < Wo; ++wo) {
                const std::int64_t base = (c * H + 2 * ho) * W + 2 * wo;
                std::int64_t best = base;
                S best_v = xd[base];
                const std::int64_t candidates[3] = {base + 1, base + W, base + W + 1};
                for (std::int64_t idx : candidates) {
                    if (xd[idx] > best_v) {
                        best_v = xd[idx];
                        best = idx;
                    }
                }
                const std::int64_t o = (c * Ho + ho) * Wo + wo;
                out->data[o] = best_v;
                (*argmax)[o] = best;
            }
        }
    }

    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out), argmax]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::size_t o = 0; o < argmax->size(); ++o) {
            x->grad[(*argmax)[o]] += out_sp->grad[o];
        }
    });
    return out;
}

// Per-channel spatial mean: CxHxW -> Cx1x1.
template <class S>
TensorPtrT<S> global_avg_pool(const TensorPtrT<S>& x) {
    detail::require(x->shape.size() == 3, "global_avg_pool: input must be CxHxW");
    const std::int64_t C = x->shape[0], HW = x->shape[1] * x->shape[2];
    auto out = TensorT<S>::zeros({C, 1, 1});
    const S inv = S(1) / static_cast<S>(HW);
    for (std::int64_t c = 0; c < C; ++c) {
        S acc = S(0);
        const S* plane = x->data.data() + c * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
            acc += plane[i];
        }
        out->data[c] = acc * inv;
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out), C, HW, inv]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c) {
            const S g = out_sp->grad[c] * inv;
            S* dst = x->grad.data() + c * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
                dst[i] += g;
            }
        }
    });
    return out;
}

// Mean across channels: CxHxW -> 1xHxW.
template <class S>
TensorPtrT<S> channel_mean(const TensorPtrT<S>& x) {
    detail::require(x->shape.size() == 3, "channel_mean: input must be CxHxW");
    const std::int64_t C = x->shape[0], HW = x->shape[1] * x->shape[2];
    auto out = TensorT<S>::zeros({1, x->shape[1], x->shape[2]});
    const S inv = S(1) / static_cast<S>(C);
    for (std::int64_t c = 0; c < C; ++c) {
        const S* plane = x->data.data() + c * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
            out->data[i] += plane[i];
        }
    }
    for (std::int64_t i = 0; i < HW; ++i) {
        out->data[i] *= inv;
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out), C, HW, inv]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c) {
            S* dst = x->grad.data() + c * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
                dst[i] += out_sp->grad[i] * inv;
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class S>
TensorPtrT<S> relu(const TensorPtrT<S>& x) {
    auto out = TensorT<S>::zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        out->data[i] = x->data[i] > S(0) ? x->data[i] : S(0);
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            if (x->data[i] > S(0)) {
                x->grad[i] += out_sp->grad[i];
            }
        }
    });
    return out;
}

template <class S>
TensorPtrT<S> sigmoid(const TensorPtrT<S>& x) {
    auto out = TensorT<S>::zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        out->data[i] = S(1) / (S(1) + std::exp(-x->data[i]));
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::size_t i = 0; i < x->data.size(); ++i) {
            const S y = out_sp->data[i];
            x->grad[i] += out_sp->grad[i] * y * (S(1) - y);
        }
    });
    return out;
}

template <class S>
TensorPtrT<S> add(const TensorPtrT<S>& a, const TensorPtrT<S>& b) {
    detail::require(a->shape == b->shape,
                    "add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = TensorT<S>::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) {
        out->data[i] = a->data[i] + b->data[i];
    }
    record_op(out, {a, b}, [a, b, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp) {
            return;
        }
        if (a->requires_grad) {
            a->accumulate_grad(out_sp->grad);
        }
        if (b->requires_grad) {
            b->accumulate_grad(out_sp->grad);
        }
    });
    return out;
}

template <class S>
TensorPtrT<S> sub(const TensorPtrT<S>& a, const TensorPtrT<S>& b) {
    detail::require(a->shape == b->shape,
                    "sub: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = TensorT<S>::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) {
        out->data[i] = a->data[i] - b->data[i];
    }
    record_op(out, {a, b}, [a, b, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp) {
            return;
        }
        if (a->requires_grad) {
            a->accumulate_grad(out_sp->grad);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < b->grad.size(); ++i) {
                b->grad[i] -= out_sp->grad[i];
            }
        }
    });
    return out;
}

// Elementwise product. Also accepts the broadcast pattern CxHxW * Cx1x1
// (in either argument order), which is how the channel attention gate is
// applied to a feature map.
template <class S>
TensorPtrT<S> mul(const TensorPtrT<S>& a, const TensorPtrT<S>& b) {
    if (a->shape == b->shape) {
        auto out = TensorT<S>::zeros(a->shape);
        for (std::size_t i = 0; i < out->data.size(); ++i) {
            out->data[i] = a->data[i] * b->data[i];
        }
        record_op(out, {a, b}, [a, b, out_w = std::weak_ptr<TensorT<S>>(out)]() {
            auto out_sp = out_w.lock();
            if (!out_sp) {
                return;
            }
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->grad.size(); ++i) {
                    a->grad[i] += out_sp->grad[i] * b->data[i];
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < b->grad.size(); ++i) {
                    b->grad[i] += out_sp->grad[i] * a->data[i];
                }
            }
        });
        return out;
    }

    const bool a_is_map = a->shape.size() == 3 && b->shape.size() == 3 && b->shape[1] == 1 && b->shape[2] == 1 &&
                          a->shape[0] == b->shape[0];
    const bool b_is_map = a->shape.size() == 3 && b->shape.size() == 3 && a->shape[1] == 1 && a->shape[2] == 1 &&
                          a->shape[0] == b->shape[0];
    detail::require(a_is_map || b_is_map,
                    "mul: shapes not broadcastable " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    const TensorPtrT<S>& map = a_is_map ? a : b;
    const TensorPtrT<S>& gate = a_is_map ? b : a;
    const std::int64_t C = map->shape[0], HW = map->shape[1] * map->shape[2];

    auto out = TensorT<S>::zeros(map->shape);
    for (std::int64_t c = 0; c < C; ++c) {
        const S g = gate->data[c];
        const S* src = map->data.data() + c * HW;
        S* dst = out->data.data() + c * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
            dst[i] = src[i] * g;
        }
    }
    record_op(out, {map, gate}, [map, gate, out_w = std::weak_ptr<TensorT<S>>(out), C, HW]() {
        auto out_sp = out_w.lock();
        if (!out_sp) {
            return;
        }
        if (map->requires_grad) {
            map->ensure_grad();
            for (std::int64_t c = 0; c < C; ++c) {
                const S g = gate->data[c];
                const S* go = out_sp->grad.data() + c * HW;
                S* dst = map->grad.data() + c * HW;
                for (std::int64_t i = 0; i < HW; ++i) {
                    dst[i] += go[i] * g;
                }
            }
        }
        if (gate->requires_grad) {
            gate->ensure_grad();
            for (std::int64_t c = 0; c < C; ++c) {
                const S* go = out_sp->grad.data() + c * HW;
                const S* src = map->data.data() + c * HW;
                S acc = S(0);
                for (std::int64_t i = 0; i < HW; ++i) {
                    acc += go[i] * src[i];
                }
                gate->grad[c] += acc;
            }
        }
    });
    return out;
}

template <class S>
TensorPtrT<S> mul_scalar(const TensorPtrT<S>& x, S c) {
    auto out = TensorT<S>::zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        out->data[i] = x->data[i] * c;
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out), c]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::size_t i = 0; i < x->grad.size(); ++i) {
            x->grad[i] += out_sp->grad[i] * c;
        }
    });
    return out;
}

template <class S>
TensorPtrT<S> add_scalar(const TensorPtrT<S>& x, S c) {
    auto out = TensorT<S>::zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        out->data[i] = x->data[i] + c;
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->accumulate_grad(out_sp->grad);
    });
    return out;
}

// Elementwise quotient; denominators must be nonzero.
template <class S>
TensorPtrT<S> divide(const TensorPtrT<S>& a, const TensorPtrT<S>& b) {
    detail::require(a->shape == b->shape,
                    "divide: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = TensorT<S>::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) {
        out->data[i] = a->data[i] / b->data[i];
    }
    record_op(out, {a, b}, [a, b, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp) {
            return;
        }
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) {
                a->grad[i] += out_sp->grad[i] / b->data[i];
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < b->grad.size(); ++i) {
                const S bv = b->data[i];
                b->grad[i] -= out_sp->grad[i] * a->data[i] / (bv * bv);
            }
        }
    });
    return out;
}

// max(x, c) with gradient passed through only where x > c.
template <class S>
TensorPtrT<S> max_scalar(const TensorPtrT<S>& x, S c) {
    auto out = TensorT<S>::zeros(x->shape);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        out->data[i] = x->data[i] > c ? x->data[i] : c;
    }
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out), c]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->ensure_grad();
        for (std::size_t i = 0; i < x->grad.size(); ++i) {
            if (x->data[i] > c) {
                x->grad[i] += out_sp->grad[i];
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops and reductions
// ---------------------------------------------------------------------------

// Stacks CxHxW parts along the channel axis.
template <class S>
TensorPtrT<S> concat_channels(const std::vector<TensorPtrT<S>>& parts) {
    detail::require(!parts.empty(), "concat_channels: no parts");
    const std::int64_t H = parts[0]->shape.size() == 3 ? parts[0]->shape[1] : -1;
    const std::int64_t W = parts[0]->shape.size() == 3 ? parts[0]->shape[2] : -1;
    std::int64_t C_total = 0;
    for (const auto& p : parts) {
        detail::require(p->shape.size() == 3, "concat_channels: parts must be CxHxW");
        detail::require(p->shape[1] == H && p->shape[2] == W,
                        "concat_channels: spatial mismatch " + shape_str(p->shape) + " vs " +
                            shape_str(parts[0]->shape));
        C_total += p->shape[0];
    }
    auto out = TensorT<S>::zeros({C_total, H, W});
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(), out->data.begin() + offset);
        offset += p->data.size();
    }
    record_op(out, parts, [parts, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp) {
            return;
        }
        std::size_t offset = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < p->data.size(); ++i) {
                    p->grad[i] += out_sp->grad[offset + i];
                }
            }
            offset += p->data.size();
        }
    });
    return out;
}

// Copy of the data as a rank-1 tensor.
template <class S>
TensorPtrT<S> flatten(const TensorPtrT<S>& x) {
    auto out = TensorT<S>::create({x->numel()}, x->data);
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        x->accumulate_grad(out_sp->grad);
    });
    return out;
}

// Sum of all elements -> scalar.
template <class S>
TensorPtrT<S> sum_all(const TensorPtrT<S>& x) {
    S acc = S(0);
    for (const S v : x->data) {
        acc += v;
    }
    auto out = TensorT<S>::scalar(acc);
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad) {
            return;
        }
        const S g = out_sp->grad[0];
        x->ensure_grad();
        for (std::size_t i = 0; i < x->grad.size(); ++i) {
            x->grad[i] += g;
        }
    });
    return out;
}

// Euclidean norm -> scalar. Fused so that the zero-vector case has a defined
// (zero) gradient instead of the 0/0 a sqrt-of-sum composition would produce.
template <class S>
TensorPtrT<S> l2_norm(const TensorPtrT<S>& x) {
    S acc = S(0);
    for (const S v : x->data) {
        acc += v * v;
    }
    const S n = std::sqrt(acc);
    auto out = TensorT<S>::scalar(n);
    record_op(out, {x}, [x, out_w = std::weak_ptr<TensorT<S>>(out), n]() {
        auto out_sp = out_w.lock();
        if (!out_sp || !x->requires_grad || n == S(0)) {
            return;
        }
        const S g = out_sp->grad[0] / n;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->grad.size(); ++i) {
            x->grad[i] += g * x->data[i];
        }
    });
    return out;
}

// Inner product of two equal-length tensors -> scalar.
template <class S>
TensorPtrT<S> dot(const TensorPtrT<S>& a, const TensorPtrT<S>& b) {
    detail::require(a->shape == b->shape,
                    "dot: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    S acc = S(0);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        acc += a->data[i] * b->data[i];
    }
    auto out = TensorT<S>::scalar(acc);
    record_op(out, {a, b}, [a, b, out_w = std::weak_ptr<TensorT<S>>(out)]() {
        auto out_sp = out_w.lock();
        if (!out_sp) {
            return;
        }
        const S g = out_sp->grad[0];
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->grad.size(); ++i) {
                a->grad[i] += g * b->data[i];
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < b->grad.size(); ++i) {
                b->grad[i] += g * a->data[i];
            }
        }
    });
    return out;
}

}  // namespace psnet
