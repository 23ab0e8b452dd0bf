"""Numba inner loop for per-observation SGD factor updates."""

import numba


@numba.njit(cache=True)
def sgd_epoch(users, items, ratings, order, U, V, lam1, lam2, alpha2,
              weight_sums, neighbor_sums, eta):
    """One pass over the observations in ``order``, updating U and V in place.

    ``neighbor_sums[:, i]`` holds sum_f Sim(i, f) * U_f, refreshed by the
    caller once per epoch; ``alpha2`` is twice the cluster-regularization
    weight.
    """
    n_factors = U.shape[0]
    for t in range(order.shape[0]):
        idx = order[t]
        i = users[idx]
        j = items[idx]
        pred = 0.0
        for l in range(n_factors):
            pred += U[l, i] * V[l, j]
        err = pred - ratings[idx]
        w = weight_sums[i]
        for l in range(n_factors):
            u_il = U[l, i]
            grad_u = err * V[l, j] + lam1 * u_il + alpha2 * (w * u_il - neighbor_sums[l, i])
            grad_v = err * u_il + lam2 * V[l, j]
            U[l, i] = u_il - eta * grad_u
            V[l, j] = V[l, j] - eta * grad_v
