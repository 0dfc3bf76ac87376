"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConsistencyError(RuntimeError):
    """A computed quantity violated an internal numerical invariant."""


class PosteriorCollapse(RuntimeError):
    """Rejection sampling could not collect enough accepted samples.

    Attributes
    ----------
    acceptance_rate : float
        Fraction of draws accepted before giving up.
    experiment : int or None
        Index of the experiment whose update failed, when known.
    """

    def __init__(self, acceptance_rate, accepted, draws, experiment=None):
        self.acceptance_rate = acceptance_rate
        self.accepted = accepted
        self.draws = draws
        self.experiment = experiment
        where = "" if experiment is None else f" at experiment {experiment}"
        super().__init__(
            f"posterior collapse{where}: {accepted} accepted out of {draws} "
            f"draws (rate {acceptance_rate:.3g})"
        )


class DegenerateOutcome(ValueError):
    """A likelihood sits on the boundary where Fisher information diverges."""


class InfeasibleEnergies(ValueError):
    """Energies admit no control map of the requested structure."""


class InconsistentAmplitudes(ValueError):
    """No sign assignment reproduces the measured amplitudes."""


class SearchBudgetExceeded(RuntimeError):
    """Backtracking explored more nodes than its budget allows."""
