"""Shared fixtures and independent oracles used across test modules.

The oracles here deliberately re-derive results with plain loops (or brute
enumeration) so library code is checked against something that shares none
of its implementation.
"""

import numpy as np

from featreg import network
from featreg.geometry import Homography, format_homography
from featreg.imaging import Image, write_pgm


def texture_image(size: int, seed: int, n_blobs: int = 60) -> Image:
    """Mid-gray canvas scattered with signed Gaussian blobs of varied scale."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(float)
    img = np.full((size, size), 0.5)
    for _ in range(n_blobs):
        cx, cy = rng.uniform(8, size - 8, 2)
        sb = rng.uniform(2.0, 6.0)
        amp = rng.uniform(0.2, 0.45) * rng.choice([-1.0, 1.0])
        img += amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sb**2))
    return Image(np.clip(img, 0, 1))


# --- naive CNN forward pass (direct nested loops, float64) --------------------

def naive_conv(x, w, b, stride, pad):
    h, wid, c_in = x.shape
    out_c, _, k, _ = w.shape
    xp = np.zeros((h + 2 * pad, wid + 2 * pad, c_in))
    xp[pad : pad + h, pad : pad + wid] = x
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wid + 2 * pad - k) // stride + 1
    out = np.zeros((oh, ow, out_c))
    for i in range(oh):
        for j in range(ow):
            for o in range(out_c):
                acc = 0.0
                for ic in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            acc += xp[i * stride + ky, j * stride + kx, ic] * w[o, ic, ky, kx]
                out[i, j, o] = acc + b[o]
    return out


def naive_maxpool(x, kernel, stride):
    h, wid, c = x.shape
    oh = (h - kernel) // stride + 1
    ow = (wid - kernel) // stride + 1
    out = np.zeros((oh, ow, c))
    for i in range(oh):
        for j in range(ow):
            for ch in range(c):
                best = -np.inf
                for ky in range(kernel):
                    for kx in range(kernel):
                        best = max(best, x[i * stride + ky, j * stride + kx, ch])
                out[i, j, ch] = best
    return out


def naive_forward(cfg, params, x):
    """Loop-based reference for cnn_forward, accumulating in float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    for layer in cfg.layers:
        if layer.kind == "conv":
            w, b = params[layer.name]
            x = naive_conv(x, np.asarray(w, float), np.asarray(b, float), layer.stride, layer.pad)
        elif layer.kind == "relu":
            x = np.where(x > 0, x, 0.0)
        elif layer.kind == "maxpool":
            x = naive_maxpool(x, layer.kernel, layer.stride)
        else:
            w, b = params[layer.name]
            flat = x.reshape(-1)
            out = np.zeros(layer.out_features)
            for o in range(layer.out_features):
                acc = 0.0
                for i in range(layer.in_features):
                    acc += float(w[o, i]) * flat[i]
                out[o] = acc + float(b[o])
            x = out
        if layer.name == cfg.tap:
            return np.asarray(x, dtype=np.float64).reshape(-1)
    raise AssertionError("tap not reached")


def warp_image(img: Image, h: Homography, fill: float = 0.5) -> Image:
    """Inverse-warp img through h: output(x) = img(h^-1(x)), bilinear, so a
    point at p in img appears at h(p) in the output."""
    inv = np.linalg.inv(h.m)
    height, width = img.pixels.shape[:2]
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    w = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / w
    sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / w
    inside = (sx >= 0) & (sx <= width - 1) & (sy >= 0) & (sy <= height - 1)
    x0 = np.clip(np.floor(sx).astype(int), 0, width - 2)
    y0 = np.clip(np.floor(sy).astype(int), 0, height - 2)
    fx = np.clip(sx - x0, 0, 1)
    fy = np.clip(sy - y0, 0, 1)
    p = img.pixels
    sampled = (
        (1 - fy) * (1 - fx) * p[y0, x0]
        + (1 - fy) * fx * p[y0, x0 + 1]
        + fy * (1 - fx) * p[y0 + 1, x0]
        + fy * fx * p[y0 + 1, x0 + 1]
    )
    return Image(np.clip(np.where(inside, sampled, fill), 0, 1))


def planted_warp_homography(size: int) -> Homography:
    """Mild projective map: 10 degree rotation + 1.2x scale about the image
    centre, small translation, small perspective terms."""
    theta = np.deg2rad(10.0)
    s = 1.2
    c = size / 2.0
    rot = np.array(
        [
            [s * np.cos(theta), -s * np.sin(theta), 0.0],
            [s * np.sin(theta), s * np.cos(theta), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    recenter = np.array([[1, 0, c], [0, 1, c], [0, 0, 1.0]])
    center = np.array([[1, 0, -c], [0, 1, -c], [0, 0, 1.0]])
    m = recenter @ rot @ center
    m[0, 2] += 3.0
    m[1, 2] -= 2.0
    m[2, 0] = 4e-5
    m[2, 1] = -3e-5
    return Homography(m)


def make_subset_dir(root, name: str, images: list[Image], homographies: list[Homography]):
    """Write a dataset subset directory: img{k}.pgm + H1to{k}p files."""
    directory = root / name
    directory.mkdir(parents=True, exist_ok=True)
    for k, img in enumerate(images, start=1):
        (directory / f"img{k}.pgm").write_bytes(write_pgm(img))
    for k, h in enumerate(homographies, start=2):
        (directory / f"H1to{k}p").write_text(format_homography(h))
    return directory


def _padding_images(n: int) -> list[Image]:
    # featureless fillers so a subset reaches its six-image shape cheaply
    return [Image(np.full((32, 32), 0.5)) for _ in range(n)]


def make_planted_subset(root, name: str, size: int = 320, seed: int = 100,
                        n_blobs: int = 200):
    """Subset whose pair (1, 2) is a planted warp; images 3..6 are blank
    fillers under identity ground truth, so the rest of the grid is trivial."""
    base = texture_image(size, seed=seed, n_blobs=n_blobs)
    h = planted_warp_homography(size)
    warped = warp_image(base, h)
    images = [base, warped] + _padding_images(4)
    hs = [h] + [Homography.identity()] * 4
    make_subset_dir(root, name, images, hs)
    return h


def make_identity_subset(root, name: str, size: int = 192, seed: int = 200):
    """Subset whose pair (1, 2) is the image matched against itself."""
    base = texture_image(size, seed=seed, n_blobs=70)
    images = [base, base] + _padding_images(4)
    hs = [Homography.identity()] * 5
    make_subset_dir(root, name, images, hs)


# --- brute-force matcher (plain loops, no argmin helpers) ----------------------

def brute_force_match(values, method: str, threshold: float):
    """Enumerate all pairs and apply the documented rules directly.

    Returns accepted (idx_a, idx_b) tuples in row order.
    """
    n, m = len(values), len(values[0])
    flat = [v for row in values for v in row]
    dmin, dmax = min(flat), max(flat)
    span = dmax - dmin

    def row_best(i):
        j = 0
        for jj in range(1, m):
            if values[i][jj] < values[i][j]:
                j = jj
        return j

    def col_best(j):
        i = 0
        for ii in range(1, n):
            if values[ii][j] < values[i][j]:
                i = ii
        return i

    def ratio_ok(d1, d2):
        if d1 == 0.0:
            return d2 > 0.0
        return d2 / d1 >= threshold

    out = []
    for i in range(n):
        j = row_best(i)
        d1 = values[i][j]
        if method in ("nn1", "nn2"):
            norm = 0.0 if span == 0 else (d1 - dmin) / span
            if not norm < threshold:
                continue
        else:
            d2 = min(values[i][jj] for jj in range(m) if jj != j)
            if not ratio_ok(d1, d2):
                continue
        if method in ("nn2", "nnr2") and col_best(j) != i:
            continue
        if method == "nnr2":
            if n < 2:
                continue
            c1 = values[col_best(j)][j]
            c2 = min(values[ii][j] for ii in range(n) if ii != col_best(j))
            if not ratio_ok(c1, c2):
                continue
        out.append((i, j))
    return out


def random_small_net(rng, max_layers: int = 3, max_side: int = 16):
    """A random conv/relu/maxpool(/fc) chain plus matching random weights."""
    side = int(rng.integers(6, max_side + 1))
    channels = int(rng.integers(1, 4))
    layers = []
    n_layers = int(rng.integers(1, max_layers + 1))
    cur_side, cur_ch = side, channels
    for li in range(n_layers):
        last = li == n_layers - 1
        choices = ["conv", "relu", "maxpool"]
        if last:
            choices.append("fc")
        kind = rng.choice(choices)
        if kind == "conv":
            k = int(rng.integers(1, min(4, cur_side) + 1))
            stride = int(rng.integers(1, 3))
            pad = int(rng.integers(0, 2))
            out_ch = int(rng.integers(1, 5))
            layers.append(network.conv(f"conv{li}", cur_ch, out_ch, k, stride, pad))
            cur_side = (cur_side + 2 * pad - k) // stride + 1
            cur_ch = out_ch
        elif kind == "relu":
            layers.append(network.relu(f"relu{li}"))
        elif kind == "maxpool":
            k = int(rng.integers(1, min(3, cur_side) + 1))
            stride = int(rng.integers(1, 3))
            layers.append(network.maxpool(f"pool{li}", k, stride))
            cur_side = (cur_side - k) // stride + 1
        else:
            out_f = int(rng.integers(1, 9))
            layers.append(network.fc(f"fc{li}", cur_side * cur_side * cur_ch, out_f))
    cfg = network.NetworkConfig(side, channels, tuple(layers), layers[-1].name)

    params = {}
    for layer in cfg.layers:
        if layer.kind == "conv":
            w = rng.normal(0, 1, (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel))
            b = rng.normal(0, 1, layer.out_channels)
            params[layer.name] = (w.astype(np.float32), b.astype(np.float32))
        elif layer.kind == "fc":
            w = rng.normal(0, 1, (layer.out_features, layer.in_features))
            b = rng.normal(0, 1, layer.out_features)
            params[layer.name] = (w.astype(np.float32), b.astype(np.float32))
    x = rng.uniform(-1, 1, (side, side, channels)).astype(np.float32)
    return cfg, params, x
