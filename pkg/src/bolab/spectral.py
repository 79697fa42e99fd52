"""Periodic spectral substrate: grids, transforms, multipliers, projections, norms.

Conventions
-----------
The domain is [-L, L) with periodic boundary, sampled at x_j = -L + j*dx,
dx = 2L/n.  The frequency lattice is xi_k = (pi/L)*k for integer
k = -n/2 .. n/2-1 (stored in this increasing order).  Coefficients follow the
integral convention

    u_hat(xi) = int u(x) exp(-i xi x) dx   ~   dx * sum_j u_j exp(-i xi x_j),

so that norms and convolutions approximate their continuum counterparts:

    sum_j |u_j|^2 dx = sum_k |u_hat_k|^2 dxi / (2 pi)          (Plancherel)
    (fg)_hat(xi)     = (dxi / 2 pi) sum_{xi1+xi2=xi} f_hat g_hat

The unpaired Nyquist mode k = -n/2 is always forced to zero.
"""

import struct

import numpy as np

BOSF_MAGIC = b"BOSF"
BOSF_VERSION = 1
_HEADER = struct.Struct("<4sIIdd")


def dispersion(xi):
    """Dispersion symbol omega(xi) = |xi| xi of the linearized equation."""
    return np.abs(xi) * xi


class Grid:
    """Spatial lattice on [-L, L) and its frequency lattice.

    Immutable after construction; safe to share between threads.
    """

    __slots__ = ("n", "half_length", "dx", "dxi", "x", "k", "xi", "_phase")

    def __init__(self, n_points, half_length):
        n = int(n_points)
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 8, got {n_points}")
        L = float(half_length)
        if L < np.pi:
            raise ValueError(
                f"half_length must be >= pi so that the frequency spacing "
                f"pi/L <= 1 resolves the band |xi| <= 1, got {half_length}"
            )
        self.n = n
        self.half_length = L
        self.dx = 2.0 * L / n
        self.dxi = np.pi / L
        self.x = -L + self.dx * np.arange(n)
        self.k = np.arange(-n // 2, n // 2)
        self.xi = self.dxi * self.k
        # (-1)^k on the shifted lattice; relates FFT order to samples at x=-L
        self._phase = np.where(self.k % 2 == 0, 1.0, -1.0)
        for a in (self.x, self.k, self.xi, self._phase):
            a.setflags(write=False)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.n == other.n
            and self.half_length == other.half_length
        )

    def __hash__(self):
        return hash((self.n, self.half_length))

    def __repr__(self):
        return f"Grid(n_points={self.n}, half_length={self.half_length!r})"


def make_grid(n_points, half_length):
    return Grid(n_points, half_length)


class SpectralField:
    """Fourier coefficients of a function on a Grid.

    Immutable value type: the coefficient array is read-only, and all
    operations return new fields.  Supports +, -, scalar *, scalar /.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid, coeffs, _checked=False):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (grid.n,):
            raise ValueError(
                f"coefficient array has length {coeffs.shape}, grid expects {grid.n}"
            )
        if not _checked:
            if coeffs[0] != 0.0:
                coeffs = coeffs.copy()
                coeffs[0] = 0.0  # Nyquist has no conjugate partner; hard-zeroed
        if coeffs.flags.writeable:
            coeffs = coeffs.copy()
            coeffs.setflags(write=False)
        self.grid = grid
        self.coeffs = coeffs

    # -- arithmetic ---------------------------------------------------------
    def _same_grid(self, other):
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._same_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, _checked=True)

    def __sub__(self, other):
        self._same_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, _checked=True)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * complex(scalar), _checked=True)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.grid, self.coeffs / complex(scalar), _checked=True)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs, _checked=True)

    def conj_reflected(self):
        """The field whose coefficients are conj(u_hat(-xi)).

        For a real-valued function this is the field itself; in general it is
        the transform of the complex conjugate of the physical-space function.
        """
        c = np.zeros_like(self.coeffs)
        c[1:] = np.conj(self.coeffs[1:][::-1])
        return SpectralField(self.grid, c, _checked=True)

    def reality_residual(self):
        """Max deviation from conjugate symmetry (0 for real-valued fields)."""
        return float(np.max(np.abs(self.coeffs - self.conj_reflected().coeffs)))

    def __repr__(self):
        return f"SpectralField(grid={self.grid!r}, ||.||={sobolev_norm(self, 0):.3e})"


def to_spectral(samples, grid):
    """Forward transform of physical samples (rectangle-rule integral weights)."""
    samples = np.asarray(samples)
    if samples.shape != (grid.n,):
        raise ValueError(
            f"sample array has length {samples.shape}, grid expects {grid.n}"
        )
    coeffs = grid.dx * grid._phase * np.fft.fftshift(np.fft.fft(samples))
    coeffs[0] = 0.0
    return SpectralField(grid, coeffs, _checked=True)


def to_physical(field):
    """Inverse transform; returns complex samples (imag ~ rounding for real data)."""
    return coeffs_to_samples(field.coeffs, field.grid)


# Array-level transform cores (no SpectralField wrapping) for solver hot loops.

def coeffs_to_samples(coeffs, grid):
    return np.fft.ifft(np.fft.ifftshift(coeffs * grid._phase)) / grid.dx


def samples_to_coeffs(samples, grid):
    c = grid.dx * grid._phase * np.fft.fftshift(np.fft.fft(samples))
    c[0] = 0.0
    return c


def apply_multiplier(field, symbol):
    """Pointwise Fourier multiplier.  `symbol` is an array over grid.xi or a callable."""
    if callable(symbol):
        symbol = symbol(field.grid.xi)
    return SpectralField(field.grid, field.coeffs * symbol, _checked=True)


# -- standard multiplier symbols ---------------------------------------------

def hilbert_symbol(grid):
    return -1j * np.sign(grid.xi)


def derivative_symbol(grid, order=1):
    return (1j * grid.xi) ** order


def antiderivative_symbol(grid):
    """1/(i xi) away from xi = 0; the zero mode is annihilated, not divided."""
    sym = np.zeros(grid.n, dtype=np.complex128)
    nz = grid.xi != 0
    sym[nz] = 1.0 / (1j * grid.xi[nz])
    return sym


def bracket_symbol(grid, s):
    """Japanese bracket power <xi>^s = (1 + xi^2)^(s/2)."""
    return (1.0 + grid.xi**2) ** (s / 2.0)


def propagator_symbol(grid, t):
    """Solution propagator exp(-i t |xi| xi) of u_t + H u_xx = 0."""
    return np.exp(-1j * t * dispersion(grid.xi))


def hilbert(field):
    return apply_multiplier(field, hilbert_symbol(field.grid))


def derivative(field, order=1):
    return apply_multiplier(field, derivative_symbol(field.grid, order))


REGIONS = ("+", "-", "lo", "hi", "+hi", "-hi", "+lo", "-lo")


def region_mask(xi, region):
    """Boolean indicator of a frequency region.

    "lo" is |xi| <= 1 (ties at |xi| = 1 belong to lo), "hi" is |xi| > 1,
    "+"/"-" are the open half-lines.  Composites intersect.
    """
    if region == "+":
        return xi > 0
    if region == "-":
        return xi < 0
    if region == "lo":
        return np.abs(xi) <= 1
    if region == "hi":
        return np.abs(xi) > 1
    if region == "+hi":
        return xi > 1
    if region == "-hi":
        return xi < -1
    if region == "+lo":
        return (xi > 0) & (xi <= 1)
    if region == "-lo":
        return (xi < 0) & (xi >= -1)
    raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")


def project(field, region):
    return SpectralField(
        field.grid, field.coeffs * region_mask(field.grid.xi, region), _checked=True
    )


def zero_mean_project(field):
    c = field.coeffs.copy()
    c[field.grid.k == 0] = 0.0
    return SpectralField(field.grid, c, _checked=True)


def sobolev_norm(field, s):
    """H^s norm: (sum <xi>^(2s) |u_hat|^2 dxi/(2 pi))^(1/2)."""
    g = field.grid
    w = (1.0 + g.xi**2) ** s
    return float(np.sqrt(np.sum(w * np.abs(field.coeffs) ** 2) * g.dxi / (2 * np.pi)))


def hardy_constant(grid):
    """max over nonzero lattice xi of <xi>/|xi|, attained at |xi| = dxi."""
    return float(np.sqrt(1.0 + grid.dxi**2) / grid.dxi)


# -- dealiased products -------------------------------------------------------
#
# Quadratic products of base-band fields are computed on the doubled lattice
# (2n points, same L), where they are alias-free: the sum of two base
# wavenumbers stays inside the doubled band.  Cascaded (cubic) products must
# stay on the doubled lattice between stages -- truncating the intermediate
# product back to the base band would drop interactions whose intermediate
# frequency leaves the band but whose final output returns to it.  A single
# factor-2 padding is exact for the quadratic-of-quadratic cascades used here,
# because aliased images of the final product land outside the retained band.

def padded_grid(grid):
    return Grid(2 * grid.n, grid.half_length)


def pad_coeffs(coeffs, n):
    """Embed base-lattice coefficients into the doubled lattice (zero-fill)."""
    out = np.zeros(2 * n, dtype=np.complex128)
    out[n // 2 : n // 2 + n] = coeffs
    return out


def unpad_coeffs(coeffs2, n):
    """Restrict doubled-lattice coefficients to the base band (and zero Nyquist)."""
    out = coeffs2[n // 2 : n // 2 + n].copy()
    out[0] = 0.0
    return out


def padded_samples(field, pgrid=None):
    """Physical samples of a base field on the doubled lattice."""
    g = field.grid
    if pgrid is None:
        pgrid = padded_grid(g)
    return to_physical(SpectralField(pgrid, pad_coeffs(field.coeffs, g.n), _checked=True))


def product_field(f, g):
    """Dealiased pointwise product of two fields (exact convolution on the band)."""
    f._same_grid(g)
    base = f.grid
    pg = padded_grid(base)
    fs = padded_samples(f, pg)
    gs = padded_samples(g, pg)
    prod = to_spectral(fs * gs, pg)
    return SpectralField(base, unpad_coeffs(prod.coeffs, base.n), _checked=True)


# -- binary snapshots ---------------------------------------------------------

def write_snapshot(field, time, path):
    """Binary field snapshot: header + complex coefficients in lattice order."""
    payload = np.ascontiguousarray(field.coeffs, dtype="<c16").tobytes()
    header = _HEADER.pack(
        BOSF_MAGIC, BOSF_VERSION, field.grid.n, field.grid.half_length, float(time)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_snapshot(path):
    """Read a snapshot written by write_snapshot; returns (field, time)."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, version, n, half_length, time = _HEADER.unpack(raw)
        if magic != BOSF_MAGIC:
            raise ValueError(f"not a field snapshot: bad magic {magic!r}")
        if version != BOSF_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        coeffs = np.frombuffer(fh.read(n * 16), dtype="<c16").astype(np.complex128)
    grid = Grid(n, half_length)
    return SpectralField(grid, coeffs), time
