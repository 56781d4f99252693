#pragma once

// Closed-form parameter counts of every architecture (k = 3, valid padding),
// written from the layer definitions independently of the model builders.

#include <vector>

#include "windcast/models.hpp"

namespace param_oracle {

using windcast::Index;
using windcast::InputShape;
using windcast::ModelKind;

inline Index dense_count(Index in, Index out) { return out * (in + 1); }
inline Index dsc_count(Index cin, Index cout) { return cin * 9 + cin * cout + 2 * cout; }
inline Index conv2d_count(Index cin, Index cout) { return cout * (cin * 9 + 1); }
inline Index v(Index n) { return n - 2; }

inline Index multidim_formula(InputShape s, Index targets)
{
    const Index flat = 16 * (v(s.steps) * v(s.features) + v(s.cities) * v(s.features) + v(s.cities) * v(s.steps));
    return dsc_count(s.cities, 16) + dsc_count(s.steps, 16) + dsc_count(s.features, 16) + dense_count(flat, 128) +
           dense_count(128, targets);
}

inline Index conv2d_formula(InputShape s, Index targets)
{
    return conv2d_count(s.cities, 32) + dense_count(32 * v(s.steps) * v(s.features), 128) + dense_count(128, targets);
}

inline Index attention_formula(InputShape s, Index targets)
{
    const Index projections = 3 * dense_count(32, 4);
    return conv2d_count(s.cities, 32) + projections + dense_count(36 * v(s.steps) * v(s.features), 128) +
           dense_count(128, targets);
}

inline Index upscaling_formula(InputShape s, Index targets)
{
    const Index transposed = s.cities * s.cities * 4 + s.cities;
    const Index h = 2 * s.steps - 4, w = 2 * s.features - 4;
    return transposed + dsc_count(s.cities, 32) + dsc_count(32, 32) + dense_count(32 * h * w, 128) +
           dense_count(128, targets);
}

inline Index conv3d_formula(InputShape s, Index targets)
{
    return 10 * (27 + 1) + dense_count(10 * v(s.cities) * v(s.steps) * v(s.features), 128) + dense_count(128, targets);
}

inline Index formula(ModelKind kind, InputShape s, Index targets)
{
    switch (kind) {
    case ModelKind::multidim: return multidim_formula(s, targets);
    case ModelKind::conv2d: return conv2d_formula(s, targets);
    case ModelKind::conv2d_attention: return attention_formula(s, targets);
    case ModelKind::conv2d_upscaling: return upscaling_formula(s, targets);
    case ModelKind::conv3d: return conv3d_formula(s, targets);
    case ModelKind::persistence: return 0;
    }
    return -1;
}

struct FrozenCount {
    ModelKind kind;
    Index denmark;
    Index netherlands;
};

/// Regression values of the closed form for the two dataset shapes; a change
/// here is an architecture change.
inline const std::vector<FrozenCount> kFrozenCounts{
    {ModelKind::multidim, 33704, 116290},        {ModelKind::conv2d, 18371, 68615},
    {ModelKind::conv2d_attention, 20815, 77203}, {ModelKind::conv2d_upscaling, 67801, 265105},
    {ModelKind::conv3d, 16155, 103711},
};

} // namespace param_oracle
