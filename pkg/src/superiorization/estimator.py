"""scikit-learn style front end: fit a reconstruction from a system matrix and measurements."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .art import ArtConfig, ArtOperator
from .engine import FeasibilityProblem, Schedule, ZeroOracle, audit_perturbations, superiorize
from .image import side_length, total_variation
from .perturbations import ComponentWiseTV, NegativeGradientTV
from .tomography import SystemMatrix


class SuperiorizedART(RegressorMixin, BaseEstimator):
    """ART reconstruction with optional TV superiorization.

    ``fit(X, y)`` treats ``X`` as the ``M x L`` system matrix (dense or
    sparse) and ``y`` as the measurements, and stores the reconstructed image
    vector in ``coef_``; ``predict(X)`` forward-projects it.  ``L`` must be a
    perfect square when ``method`` is ``"cw"`` or ``"ng"``.

    Parameters
    ----------
    method : {"cw", "ng", "none"}
        Component-wise TV perturbations, negative-gradient TV perturbations,
        or plain ART.
    relaxation : float
        ART relaxation parameter in ``(0, 2)``.
    epsilon : float
        Stop at the first iterate with ``||X coef - y|| <= epsilon``.
    eta0, kernel, n_inner : float, float, int
        Perturbation sizes ``eta0 * kernel**ell`` and steps per ART sweep.
    max_iter : int
        Cap on ART sweeps.
    strict : bool
        Verify every perturbation against its nonascending ball.
    """

    def __init__(self, method="cw", relaxation=1.0, epsilon=1.0, eta0=0.2, kernel=0.995,
                 n_inner=10, max_iter=5000, strict=False):
        self.method = method
        self.relaxation = relaxation
        self.epsilon = epsilon
        self.eta0 = eta0
        self.kernel = kernel
        self.n_inner = n_inner
        self.max_iter = max_iter
        self.strict = strict

    def _oracle(self):
        if self.method == "cw":
            return ComponentWiseTV()
        if self.method == "ng":
            return NegativeGradientTV()
        if self.method == "none":
            return ZeroOracle()
        raise ValueError(f"method must be 'cw', 'ng' or 'none', got {self.method!r}")

    def fit(self, X, y):
        if isinstance(X, SystemMatrix):
            X = X.csr
        X, y = check_X_y(X, y, accept_sparse="csr", dtype=np.float64, y_numeric=True)
        oracle = self._oracle()
        if self.method != "none":
            side_length(np.empty(X.shape[1]))
        A = SystemMatrix(sp.csr_matrix(X))
        op = ArtOperator(A, y, ArtConfig(self.relaxation))
        schedule = Schedule(self.eta0, self.kernel, self.n_inner)
        problem = FeasibilityProblem(op, op.proximity, self.epsilon)
        coef, trace = superiorize(problem, oracle, schedule, np.zeros(A.L),
                                  max_iter=self.max_iter, strict=self.strict)
        self.coef_ = coef
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.terminated_ = trace.terminated
        self.proximity_ = trace.final_prox
        self.audit_ = audit_perturbations(trace, schedule)
        self.n_features_in_ = A.L
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        if isinstance(X, SystemMatrix):
            X = X.csr
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return np.asarray(X @ self.coef_).ravel()

    def image(self) -> np.ndarray:
        """Reconstruction as a ``J x J`` array."""
        check_is_fitted(self, "coef_")
        J = side_length(self.coef_)
        return self.coef_.reshape(J, J)

    def total_variation(self) -> float:
        check_is_fitted(self, "coef_")
        return total_variation(self.coef_)
