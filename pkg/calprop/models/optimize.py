from typing import Callable, List, NamedTuple, Tuple
import numpy as np
from ..exceptions import OptimizationError


Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class DescentResult(NamedTuple):
    """
    The outcome of a gradient descent run.
    """

    params: np.ndarray
    losses: List[float]
    iterations: int
    converged: bool


def minimize(objective: Objective, initial, learning_rate: float = 1.0, tolerance: float = 1e-8,
             max_iterations: int = 10_000, max_halvings: int = 60) -> DescentResult:
    """
    Full-batch gradient descent with a step-halving line search. A step
    is accepted only when the loss does not increase, so the recorded
    losses are non-increasing. Trial steps follow the Barzilai-Borwein
    length of the previous accepted step.
    :param objective: Maps parameters to (loss, gradient).
    :param initial: The starting parameters.
    :param learning_rate: The first trial step length.
    :param tolerance: Stop once the gradient norm falls below it.
    :param max_iterations: The iteration budget.
    :param max_halvings: How many times a trial step may be halved.
    :return: The descent result.
    """

    params = np.array(initial, dtype=float)
    loss, gradient = objective(params)
    if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
        raise OptimizationError(0, "the initial loss or gradient is not finite")

    losses = [float(loss)]
    step = learning_rate
    for iteration in range(1, max_iterations + 1):
        if np.linalg.norm(gradient) < tolerance:
            return DescentResult(params, losses, iteration - 1, True)

        trial = step
        candidate_loss = np.nan
        for _ in range(max_halvings):
            candidate = params - trial * gradient
            candidate_loss, candidate_gradient = objective(candidate)
            if np.isfinite(candidate_loss) and candidate_loss <= loss:
                break
            trial *= 0.5
        else:
            if not np.isfinite(candidate_loss):
                raise OptimizationError(iteration, "the loss became non-finite and no step recovered it")
            # No decreasing step at working precision: stationary.
            return DescentResult(params, losses, iteration - 1, True)

        if not np.all(np.isfinite(candidate_gradient)):
            raise OptimizationError(iteration, "the gradient became non-finite")
        moved = candidate - params
        change = candidate_gradient - gradient
        curvature = float(moved @ change)
        step = float(moved @ moved) / curvature if curvature > 0 else 2.0 * trial
        params, loss, gradient = candidate, candidate_loss, candidate_gradient
        losses.append(float(loss))

    return DescentResult(params, losses, max_iterations, bool(np.linalg.norm(gradient) < tolerance))
