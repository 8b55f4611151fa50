"""Periodic simulation lattice and plane-wave mode-space transforms.

The field is expanded over discrete plane waves exp(i k.x)/sqrt(V) with
k components 2*pi*m/L in standard FFT ordering, so a mode amplitude is
alpha_k = integral dx exp(-i k.x) f(x) / sqrt(V).  With this convention a
constant field c has alpha_0 = c*sqrt(V) and Parseval reads
sum_x |f|^2 dV = sum_k |alpha_k|^2.
"""

from dataclasses import dataclass, field
import numpy as np


@dataclass(eq=False)
class Lattice:
    """Uniform periodic grid in 1 to 3 dimensions.

    dims     -- points per dimension
    lengths  -- box lengths per dimension
    """

    dims: tuple
    lengths: tuple

    # filled in by __post_init__
    shape: tuple = field(init=False, repr=False)
    ndim: int = field(init=False, repr=False)
    n_points: int = field(init=False, repr=False)
    volume: float = field(init=False, repr=False)
    dv: float = field(init=False, repr=False)
    kvecs: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)
    neg_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.lengths = tuple(float(L) for L in self.lengths)
        if len(self.dims) != len(self.lengths):
            raise ValueError("dims and lengths must have the same rank")
        if not 1 <= len(self.dims) <= 3:
            raise ValueError("only 1 to 3 dimensions are supported")
        if any(n < 1 for n in self.dims):
            raise ValueError("each dimension needs at least one point")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("box lengths must be positive")

        self.shape = self.dims
        self.ndim = len(self.dims)
        self.n_points = int(np.prod(self.dims))
        self.volume = float(np.prod(self.lengths))
        self.dv = self.volume / self.n_points

        # one wavevector per grid point, FFT ordering; component 2*pi*m/L
        axes = [2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
                for n, L in zip(self.dims, self.lengths)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.kvecs = np.stack([m.ravel() for m in mesh], axis=-1)
        self.k2 = sum(m ** 2 for m in mesh)

        # flat index of the -k partner of each mode (Nyquist is its own)
        flips = [(-np.arange(n)) % n for n in self.dims]
        fmesh = np.meshgrid(*flips, indexing="ij")
        self.neg_index = np.ravel_multi_index(fmesh, self.dims).ravel()

    @property
    def spacings(self):
        return tuple(L / n for n, L in zip(self.dims, self.lengths))

    @property
    def self_paired(self):
        """Boolean mask over flat mode indices where k and -k coincide."""
        return self.neg_index == np.arange(self.n_points)

    def axis_coords(self):
        """Per-axis position samples x_j = j*dx."""
        return [np.arange(n) * (L / n) for n, L in zip(self.dims, self.lengths)]

    def position_grids(self):
        return np.meshgrid(*self.axis_coords(), indexing="ij")

    def integrate(self, values):
        """Trapezoid-free periodic quadrature: sum over sites times dV."""
        return np.sum(values, axis=tuple(range(-self.ndim, 0))) * self.dv


def build_lattice(dims, lengths) -> Lattice:
    """Validated constructor; rejects dimensions with fewer than 2 points.

    Single-point lattices (the zero-dimensional, one-mode limit) are
    deliberately kept out of the main constructor; use
    single_mode_lattice for those.
    """
    dims = tuple(int(n) for n in dims)
    if any(n < 2 for n in dims):
        raise ValueError("each dimension needs at least 2 points; "
                         "use single_mode_lattice() for the one-mode limit")
    return Lattice(dims=dims, lengths=tuple(lengths))


def single_mode_lattice(extent: float = 1.0) -> Lattice:
    """One point, one mode: the zero-dimensional limit used to exercise
    single-mode dynamics against exact oracles."""
    return Lattice(dims=(1,), lengths=(float(extent),))


def to_modes(field_values, lat: Lattice):
    """Project a position-space field onto plane-wave amplitudes.

    Accepts leading batch axes; the transform acts on the trailing
    lat.ndim axes.  Returns amplitudes in FFT ordering with the same
    leading shape.
    """
    axes = tuple(range(-lat.ndim, 0))
    amps = np.fft.fftn(np.asarray(field_values, dtype=complex), axes=axes)
    amps *= lat.dv / np.sqrt(lat.volume)
    return amps


def to_position(amplitudes, lat: Lattice):
    """Inverse of to_modes."""
    axes = tuple(range(-lat.ndim, 0))
    f = np.fft.ifftn(np.asarray(amplitudes, dtype=complex), axes=axes)
    f *= lat.n_points / np.sqrt(lat.volume)
    return f


def mode_amplitudes_flat(field_values, lat: Lattice):
    """to_modes with the grid axes flattened to one trailing axis."""
    amps = to_modes(field_values, lat)
    return amps.reshape(amps.shape[:-lat.ndim] + (lat.n_points,))


def field_from_flat(amps_flat, lat: Lattice):
    amps = np.asarray(amps_flat, dtype=complex)
    return to_position(amps.reshape(amps.shape[:-1] + lat.shape), lat)
