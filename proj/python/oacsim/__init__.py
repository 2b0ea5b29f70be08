"""Python surface of the oacsim simulator core."""

try:
    from ._oacsim import (  # noqa: F401
        compare_json,
        expected_laplacian,
        fiedler,
        lyapunov,
        moments_json,
        run_json,
        validate_json,
    )
except ImportError:  # in-tree builds keep the module next to the package
    from _oacsim import (  # noqa: F401
        compare_json,
        expected_laplacian,
        fiedler,
        lyapunov,
        moments_json,
        run_json,
        validate_json,
    )

__all__ = [
    "compare_json",
    "expected_laplacian",
    "fiedler",
    "lyapunov",
    "moments_json",
    "run_json",
    "validate_json",
]
