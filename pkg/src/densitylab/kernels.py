"""Hot loops of the guidance dynamics.

Each kernel exists twice: a numba ``@njit`` loop and a vectorized numpy
version with identical per-particle arithmetic.  The module-level names
(``interpolate_velocity`` etc.) bind to one or the other according to
:data:`densitylab._accel.USE_NUMBA`.

Grid conventions: node ``g`` of a particle sits at the cell centre
``(g + 1/2) dx``; cell ``g`` is ``[g dx, (g + 1) dx)``.  Flattened
configuration indices are C-ordered over ``(q_1, ..., q_N)``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


def neighbor_table(sites: int, n: int, periodic: bool) -> np.ndarray:
    """``(sites**n, n, 2)`` flat index of ``g + e_i`` / ``g - e_i``; -1 outside a hard wall."""
    dim = sites**n
    cells = np.array(np.unravel_index(np.arange(dim), (sites,) * n)).T.reshape(dim, n)
    strides = sites ** np.arange(n - 1, -1, -1)
    out = np.empty((dim, n, 2), dtype=np.int64)
    flat = np.arange(dim)
    for i in range(n):
        for side, step in enumerate((1, -1)):
            c = cells[:, i] + step
            if periodic:
                out[:, i, side] = flat + ((c % sites) - cells[:, i]) * strides[i]
            else:
                ok = (c >= 0) & (c < sites)
                out[:, i, side] = np.where(ok, flat + step * strides[i], -1)
    return out


# --------------------------------------------------------------------------
# grid fields: probability current and density on the nodes


def _density_fields_numpy(w, nbr, inv_mass, spacing):
    dim, n, _ = nbr.shape
    cols = np.arange(dim)
    den = np.real(w[cols, cols]).copy()
    flux = np.zeros((dim, n))
    for i in range(n):
        plus, minus = nbr[:, i, 0], nbr[:, i, 1]
        up = np.where(plus >= 0, w[np.maximum(plus, 0), cols], 0.0)
        down = np.where(minus >= 0, w[np.maximum(minus, 0), cols], 0.0)
        flux[:, i] = np.imag(up - down) * (inv_mass[i] / (2.0 * spacing))
    return flux, den


@njit
def _density_fields_numba(w, nbr, inv_mass, spacing):
    dim, n = nbr.shape[0], nbr.shape[1]
    den = np.empty(dim)
    flux = np.zeros((dim, n))
    for g in range(dim):
        den[g] = w[g, g].real
        for i in range(n):
            up = 0.0j
            down = 0.0j
            if nbr[g, i, 0] >= 0:
                up = w[nbr[g, i, 0], g]
            if nbr[g, i, 1] >= 0:
                down = w[nbr[g, i, 1], g]
            flux[g, i] = (up - down).imag * (inv_mass[i] / (2.0 * spacing))
    return flux, den


def _pure_fields_numpy(psi, nbr, inv_mass, spacing):
    """``psi`` has shape ``(spatial_dim, spin_dim)``."""
    dim, n, _ = nbr.shape
    den = np.sum(np.abs(psi) ** 2, axis=1)
    flux = np.zeros((dim, n))
    conj = psi.conj()
    for i in range(n):
        plus, minus = nbr[:, i, 0], nbr[:, i, 1]
        up = np.where((plus >= 0)[:, None], psi[np.maximum(plus, 0)], 0.0)
        down = np.where((minus >= 0)[:, None], psi[np.maximum(minus, 0)], 0.0)
        flux[:, i] = np.imag(np.sum(up * conj - down * conj, axis=1)) * (inv_mass[i] / (2.0 * spacing))
    return flux, den


@njit
def _pure_fields_numba(psi, nbr, inv_mass, spacing):
    dim, n = nbr.shape[0], nbr.shape[1]
    k = psi.shape[1]
    den = np.zeros(dim)
    flux = np.zeros((dim, n))
    for g in range(dim):
        for s in range(k):
            den[g] += psi[g, s].real ** 2 + psi[g, s].imag ** 2
        for i in range(n):
            acc = 0.0
            for s in range(k):
                c = np.conj(psi[g, s])
                up = 0.0j
                down = 0.0j
                if nbr[g, i, 0] >= 0:
                    up = psi[nbr[g, i, 0], s]
                if nbr[g, i, 1] >= 0:
                    down = psi[nbr[g, i, 1], s]
                acc += (up * c - down * c).imag
            flux[g, i] = acc * (inv_mass[i] / (2.0 * spacing))
    return flux, den


# --------------------------------------------------------------------------
# multilinear interpolation of current / density at continuum positions


def _interpolate_velocity_numpy(pos, flux, den, sites, spacing, periodic, eps):
    m, n = pos.shape
    s = pos / spacing - 0.5
    if periodic:
        base = np.floor(s)
        frac = s - base
        lo = base.astype(np.int64) % sites
        hi = (lo + 1) % sites
    else:
        s = np.clip(s, 0.0, sites - 1.0)
        lo = np.minimum(np.floor(s).astype(np.int64), sites - 2)
        frac = s - lo
        hi = lo + 1
    num = np.zeros((m, n))
    rho = np.zeros(m)
    for corner in range(1 << n):
        weight = np.ones(m)
        idx = np.zeros(m, dtype=np.int64)
        for i in range(n):
            if (corner >> (n - 1 - i)) & 1:
                weight = weight * frac[:, i]
                idx = idx * sites + hi[:, i]
            else:
                weight = weight * (1.0 - frac[:, i])
                idx = idx * sites + lo[:, i]
        rho = rho + weight * den[idx]
        num = num + weight[:, None] * flux[idx]
    out = np.zeros((m, n))
    ok = rho >= eps
    out[ok] = num[ok] / rho[ok, None]
    return out


@njit
def _interpolate_velocity_numba(pos, flux, den, sites, spacing, periodic, eps):
    m, n = pos.shape
    out = np.zeros((m, n))
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    frac = np.empty(n)
    num = np.empty(n)
    for p in range(m):
        for i in range(n):
            s = pos[p, i] / spacing - 0.5
            if periodic:
                base = np.floor(s)
                frac[i] = s - base
                lo[i] = np.int64(base) % sites
                hi[i] = (lo[i] + 1) % sites
            else:
                s = min(max(s, 0.0), sites - 1.0)
                lo[i] = min(np.int64(np.floor(s)), sites - 2)
                frac[i] = s - lo[i]
                hi[i] = lo[i] + 1
            num[i] = 0.0
        rho = 0.0
        for corner in range(1 << n):
            weight = 1.0
            idx = 0
            for i in range(n):
                if (corner >> (n - 1 - i)) & 1:
                    weight = weight * frac[i]
                    idx = idx * sites + hi[i]
                else:
                    weight = weight * (1.0 - frac[i])
                    idx = idx * sites + lo[i]
            rho = rho + weight * den[idx]
            for i in range(n):
                num[i] = num[i] + weight * flux[idx, i]
        if rho >= eps:
            for i in range(n):
                out[p, i] = num[i] / rho
    return out


# --------------------------------------------------------------------------
# boundary handling and binning


def _apply_boundary_numpy(pos, box, periodic):
    if periodic:
        out = np.mod(pos, box)
        # np.mod can return box itself for tiny negative inputs
        return np.where(out >= box, 0.0, out)
    return np.clip(pos, 0.0, np.nextafter(box, 0.0))


@njit
def _apply_boundary_numba(pos, box, periodic):
    out = np.empty_like(pos)
    top = np.nextafter(box, 0.0)
    for p in range(pos.shape[0]):
        for i in range(pos.shape[1]):
            x = pos[p, i]
            if periodic:
                x = x % box
                if x >= box:
                    x = 0.0
            else:
                x = min(max(x, 0.0), top)
            out[p, i] = x
    return out


def _cell_index_numpy(pos, sites, spacing):
    c = np.clip(np.floor(pos / spacing).astype(np.int64), 0, sites - 1)
    idx = np.zeros(pos.shape[0], dtype=np.int64)
    for i in range(pos.shape[1]):
        idx = idx * sites + c[:, i]
    return idx


@njit
def _cell_index_numba(pos, sites, spacing):
    out = np.empty(pos.shape[0], dtype=np.int64)
    for p in range(pos.shape[0]):
        idx = 0
        for i in range(pos.shape[1]):
            c = np.int64(np.floor(pos[p, i] / spacing))
            c = min(max(c, 0), sites - 1)
            idx = idx * sites + c
        out[p] = idx
    return out


NUMPY = {
    "density_fields": _density_fields_numpy,
    "pure_fields": _pure_fields_numpy,
    "interpolate_velocity": _interpolate_velocity_numpy,
    "apply_boundary": _apply_boundary_numpy,
    "cell_index": _cell_index_numpy,
}
NUMBA = {
    "density_fields": _density_fields_numba,
    "pure_fields": _pure_fields_numba,
    "interpolate_velocity": _interpolate_velocity_numba,
    "apply_boundary": _apply_boundary_numba,
    "cell_index": _cell_index_numba,
}
ACTIVE = NUMBA if USE_NUMBA else NUMPY

density_fields = ACTIVE["density_fields"]
pure_fields = ACTIVE["pure_fields"]
interpolate_velocity = ACTIVE["interpolate_velocity"]
apply_boundary = ACTIVE["apply_boundary"]
cell_index = ACTIVE["cell_index"]
