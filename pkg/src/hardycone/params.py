from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N``, exponent ``p`` and weight exponent ``alpha``.

    ``tol`` is the target accuracy for the cone eigenvalue solver; the ODE
    integrator runs at ``tol / 10``.
    """

    N: int
    p: float
    alpha: float = 0.0
    tol: float = 1e-9

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p!r}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "tol", float(self.tol))

    def with_alpha(self, alpha: float) -> "ProblemParams":
        return ProblemParams(self.N, self.p, alpha, self.tol)

    def as_dict(self) -> dict:
        return {"N": self.N, "p": self.p, "alpha": self.alpha}
