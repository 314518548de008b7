"""
DigiWFS Unwrap - Unwrap report

Result container shared by every unwrapping method.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from backend.optics.grid import PhaseGrid


@dataclass
class UnwrapReport:
    """
    Reconstructed phase plus diagnostics.

    ``runtime_ms`` is not part of :meth:`to_lines`; written reports are
    byte-identical across runs.
    """

    phase: PhaseGrid
    method: str
    iterations: int = 0
    converged: bool = True
    objective: List[float] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    runtime_ms: float = 0.0

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def to_lines(self) -> List[str]:
        """
        Render the report as ``key=value`` lines.

        Returns:
            List[str]: Lines in a fixed order
        """
        lines = [
            f"method={self.method}",
            f"n={self.phase.n}",
            f"iterations={self.iterations}",
            f"converged={str(self.converged).lower()}",
            f"flags={','.join(self.flags)}",
        ]
        if self.objective:
            lines.append(f"objective_initial={self.objective[0]:.12g}")
            lines.append(f"objective_final={self.objective[-1]:.12g}")
        for key in sorted(self.diagnostics):
            value = self.diagnostics[key]
            if isinstance(value, (float, np.floating)):
                lines.append(f"{key}={float(value):.12g}")
            elif isinstance(value, (list, tuple)):
                lines.append(f"{key}={','.join(str(v) for v in value)}")
            elif isinstance(value, np.ndarray):
                continue
            else:
                lines.append(f"{key}={value}")
        return lines
