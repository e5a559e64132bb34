"""Every acceptance criterion at its stated tolerance.

Each check returns the measured values next to their thresholds; the
summary at the end of the pytest run lists one PASS/FAIL line per
criterion.  Run directly (``python tests/test_acceptance.py``) for the
lines alone.  Known failures are marked xfail with the reason; they run
unchanged and would show up as XPASS if they started passing.
"""
import pytest

from semidirac import acceptance

from conftest import ACCEPTANCE_LINES

KNOWN_FAILURES = {
    "crossed": "E.B is not zero for TE+TM superpositions, so the crossed-field identity cannot hold",
    "trap": "the spin branches order z(t) as required, but rho grows steadily (~0.08 c) and sets new maxima "
            "to the end of the run under both readings of the initial azimuthal velocity: no transverse trapping",
    "gradient": "1.5e-6 worst error from E.B rounding on imaginary-lambda points; 1e-8 without that channel",
    "selfconsistent": "one refinement changes the t=2000 trajectory by ~0.1 c/omega; secular growth from a "
                      "~5e-6 effective field",
}


def _param(name):
    marks = [pytest.mark.xfail(reason=KNOWN_FAILURES[name], strict=True)] if name in KNOWN_FAILURES else []
    return pytest.param(name, marks=marks, id=name)


@pytest.mark.parametrize("name", [_param(n) for n in acceptance.CHECKS])
def test_criterion(name):
    result = acceptance.CHECKS[name]()
    ACCEPTANCE_LINES.append(result.line())
    print(result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    for result in acceptance.run_suite("all"):
        print(result.line())
