"""Axis-aligned rectangles in the complex plane."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class WindowBox:
    """Closed rectangle [lo.real, hi.real] x [lo.imag, hi.imag].

    Degenerate boxes (zero width or height) are rejected: every consumer
    here integrates over the boundary or subdivides the interior.
    """

    lo: complex
    hi: complex

    def __post_init__(self):
        if not (math.isfinite(self.lo.real) and math.isfinite(self.lo.imag)
                and math.isfinite(self.hi.real) and math.isfinite(self.hi.imag)):
            raise ValueError("window corners must be finite")
        if not (self.lo.real < self.hi.real and self.lo.imag < self.hi.imag):
            raise ValueError("window must have positive width and height")

    @property
    def width(self) -> float:
        return self.hi.real - self.lo.real

    @property
    def height(self) -> float:
        return self.hi.imag - self.lo.imag

    @property
    def center(self) -> complex:
        return complex((self.lo.real + self.hi.real) / 2.0,
                       (self.lo.imag + self.hi.imag) / 2.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    def corners(self) -> tuple[complex, complex, complex, complex]:
        """Counterclockwise from lo."""
        return (self.lo,
                complex(self.hi.real, self.lo.imag),
                self.hi,
                complex(self.lo.real, self.hi.imag))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.lo.real - pad <= z.real <= self.hi.real + pad
                and self.lo.imag - pad <= z.imag <= self.hi.imag + pad)

    def inflate(self, factor: float) -> "WindowBox":
        """Scale about the center by `factor` (> 0)."""
        c = self.center
        hw = self.width / 2.0 * factor
        hh = self.height / 2.0 * factor
        return WindowBox(complex(c.real - hw, c.imag - hh),
                         complex(c.real + hw, c.imag + hh))

    def split(self, fx: float = 0.5, fy: float = 0.5) -> tuple["WindowBox", ...]:
        """Four child boxes cut at the given width/height fractions.

        Children tile the parent exactly; returned in (SW, SE, NW, NE) order.
        """
        if not (0.0 < fx < 1.0 and 0.0 < fy < 1.0):
            raise ValueError("split fractions must lie strictly inside (0, 1)")
        xm = self.lo.real + self.width * fx
        ym = self.lo.imag + self.height * fy
        x0, x1 = self.lo.real, self.hi.real
        y0, y1 = self.lo.imag, self.hi.imag
        return (WindowBox(complex(x0, y0), complex(xm, ym)),
                WindowBox(complex(xm, y0), complex(x1, ym)),
                WindowBox(complex(x0, ym), complex(xm, y1)),
                WindowBox(complex(xm, ym), complex(x1, y1)))

    def grid(self, nx: int, ny: int):
        """Inclusive nx-by-ny lattice of sample points, row-major from lo."""
        import numpy as np
        xs = np.linspace(self.lo.real, self.hi.real, nx)
        ys = np.linspace(self.lo.imag, self.hi.imag, ny)
        return (xs[None, :] + 1j * ys[:, None]).ravel()
