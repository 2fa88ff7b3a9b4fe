'''
Numba kernels walking every pooling window of a [batch, maps, h, w] tensor.

Selected positions are stored as flat offsets inside one example,
(map * h + row) * w + col, with -1 for the all-dropped outcome.
'''
from numba import njit
import numpy as np

@njit
def _output_extent(side, window, stride):
    return (side - window) // stride + 1

@njit
def _insertion_sort(values, offsets, n):
    # Stable: equal values keep their original window order.
    for i in range(1, n):
        value = values[i]
        offset = offsets[i]
        j = i - 1
        while j >= 0 and values[j] > value:
            values[j + 1] = values[j]
            offsets[j + 1] = offsets[j]
            j -= 1
        values[j + 1] = value
        offsets[j + 1] = offset

@njit
def max_pool_kernel(x, window, stride):
    batch, maps, height, width = x.shape
    out_h = _output_extent(height, window, stride)
    out_w = _output_extent(width, window, stride)
    out = np.empty((batch, maps, out_h, out_w), x.dtype)
    selected = np.empty((batch, maps, out_h, out_w), np.int64)
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    best = -np.inf
                    best_offset = -1
                    for di in range(window):
                        r = i * stride + di
                        for dj in range(window):
                            c = j * stride + dj
                            value = x[b, m, r, c]
                            if value > best:
                                best = value
                                best_offset = (m * height + r) * width + c
                    out[b, m, i, j] = best
                    selected[b, m, i, j] = best_offset
    return out, selected

@njit
def masked_max_pool_kernel(x, mask, window, stride):
    batch, maps, height, width = x.shape
    out_h = _output_extent(height, window, stride)
    out_w = _output_extent(width, window, stride)
    out = np.empty((batch, maps, out_h, out_w), x.dtype)
    selected = np.empty((batch, maps, out_h, out_w), np.int64)
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    best = -np.inf
                    best_offset = -1
                    for di in range(window):
                        r = i * stride + di
                        for dj in range(window):
                            c = j * stride + dj
                            if mask[b, m, r, c]:
                                value = x[b, m, r, c]
                                if value > best:
                                    best = value
                                    best_offset = (m * height + r) * width + c
                    if best_offset < 0:
                        out[b, m, i, j] = 0.0
                    else:
                        out[b, m, i, j] = best
                    selected[b, m, i, j] = best_offset
    return out, selected

@njit
def multinomial_max_dropout_kernel(x, uniforms, window, stride, retain_p):
    batch, maps, height, width = x.shape
    out_h = _output_extent(height, window, stride)
    out_w = _output_extent(width, window, stride)
    n = window * window
    drop_p = 1.0 - retain_p
    out = np.empty((batch, maps, out_h, out_w), x.dtype)
    selected = np.empty((batch, maps, out_h, out_w), np.int64)
    values = np.empty(n, x.dtype)
    offsets = np.empty(n, np.int64)
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    k = 0
                    for di in range(window):
                        r = i * stride + di
                        for dj in range(window):
                            c = j * stride + dj
                            values[k] = x[b, m, r, c]
                            offsets[k] = (m * height + r) * width + c
                            k += 1
                    _insertion_sort(values, offsets, n)
                    # Walk outcomes from the strongest unit down; p_0 is what remains.
                    u = uniforms[b, m, i, j]
                    cumulative = 0.0
                    weight = retain_p
                    choice = -1
                    for rank in range(n - 1, -1, -1):
                        cumulative += weight
                        if u < cumulative:
                            choice = rank
                            break
                        weight *= drop_p
                    if choice < 0:
                        out[b, m, i, j] = 0.0
                        selected[b, m, i, j] = -1
                    else:
                        out[b, m, i, j] = values[choice]
                        selected[b, m, i, j] = offsets[choice]
    return out, selected

@njit
def stochastic_sample_kernel(x, uniforms, window, stride):
    batch, maps, height, width = x.shape
    out_h = _output_extent(height, window, stride)
    out_w = _output_extent(width, window, stride)
    n = window * window
    out = np.empty((batch, maps, out_h, out_w), x.dtype)
    selected = np.empty((batch, maps, out_h, out_w), np.int64)
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    total = 0.0
                    for di in range(window):
                        for dj in range(window):
                            total += x[b, m, i * stride + di, j * stride + dj]
                    u = uniforms[b, m, i, j]
                    if total <= 0.0:
                        # 0/0 region: uniform choice, the pooled value is 0 either way.
                        k = min(int(u * n), n - 1)
                        r = i * stride + k // window
                        c = j * stride + k % window
                        out[b, m, i, j] = x[b, m, r, c]
                        selected[b, m, i, j] = (m * height + r) * width + c
                        continue
                    target = u * total
                    cumulative = 0.0
                    last_r = i * stride
                    last_c = j * stride
                    found = False
                    for di in range(window):
                        r = i * stride + di
                        for dj in range(window):
                            c = j * stride + dj
                            value = x[b, m, r, c]
                            if value > 0.0:
                                last_r = r
                                last_c = c
                            cumulative += value
                            if not found and value > 0.0 and target < cumulative:
                                out[b, m, i, j] = value
                                selected[b, m, i, j] = (m * height + r) * width + c
                                found = True
                    if not found:
                        # Rounding left the target past the final sum.
                        out[b, m, i, j] = x[b, m, last_r, last_c]
                        selected[b, m, i, j] = (m * height + last_r) * width + last_c
    return out, selected

@njit
def prob_weighted_kernel(x, window, stride, retain_p):
    batch, maps, height, width = x.shape
    out_h = _output_extent(height, window, stride)
    out_w = _output_extent(width, window, stride)
    n = window * window
    drop_p = 1.0 - retain_p
    out = np.empty((batch, maps, out_h, out_w), x.dtype)
    values = np.empty(n, x.dtype)
    offsets = np.empty(n, np.int64)
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    k = 0
                    for di in range(window):
                        for dj in range(window):
                            values[k] = x[b, m, i * stride + di, j * stride + dj]
                            offsets[k] = k
                            k += 1
                    _insertion_sort(values, offsets, n)
                    pooled = 0.0
                    weight = retain_p
                    for rank in range(n - 1, -1, -1):
                        pooled += weight * values[rank]
                        weight *= drop_p
                    out[b, m, i, j] = pooled
    return out

@njit
def stochastic_weighted_kernel(x, window, stride):
    batch, maps, height, width = x.shape
    out_h = _output_extent(height, window, stride)
    out_w = _output_extent(width, window, stride)
    out = np.empty((batch, maps, out_h, out_w), x.dtype)
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    total = 0.0
                    squares = 0.0
                    for di in range(window):
                        for dj in range(window):
                            value = x[b, m, i * stride + di, j * stride + dj]
                            total += value
                            squares += value * value
                    out[b, m, i, j] = squares / total if total > 0.0 else 0.0
    return out

@njit
def gather_kernel(x, selected):
    batch, maps, height, width = x.shape
    out = np.zeros(selected.shape, x.dtype)
    per_map = height * width
    for b in range(batch):
        for m in range(selected.shape[1]):
            for i in range(selected.shape[2]):
                for j in range(selected.shape[3]):
                    offset = selected[b, m, i, j]
                    if offset >= 0:
                        src_map = offset // per_map
                        rest = offset % per_map
                        out[b, m, i, j] = x[b, src_map, rest // width, rest % width]
    return out

@njit
def route_gradient_kernel(grad_out, selected, height, width):
    batch, maps, out_h, out_w = grad_out.shape
    grad_in = np.zeros((batch, maps, height, width), grad_out.dtype)
    per_map = height * width
    for b in range(batch):
        for m in range(maps):
            for i in range(out_h):
                for j in range(out_w):
                    offset = selected[b, m, i, j]
                    if offset >= 0:
                        src_map = offset // per_map
                        rest = offset % per_map
                        # Overlapping windows accumulate additively.
                        grad_in[b, src_map, rest // width, rest % width] += grad_out[b, m, i, j]
    return grad_in
