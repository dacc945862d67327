"""Independent reference implementations used as test oracles.

Nothing here imports the code paths under test beyond plain data types:
training uses an augmented least-squares solve (SVD), the CV criterion is
written out loop by loop, and search is a plain loop over every mask.
"""

import itertools

import numpy as np
from scipy.optimize import minimize

# w*' Sigma w* for p=20, rho=0.35 and w* = (1,0,1,0,...), evaluated as an
# explicit double sum over (j, j') before the library existed.
PAPER_SIGNAL_VARIANCE = 12.473843556706765


def lstsq_train(X, y, support, gamma):
    """argmin 0.5||w_S||^2 + gamma/2 ||y - X_S w_S - b||^2 via stacked lstsq."""
    X = np.asarray(X, dtype=float)
    m, p = X.shape
    support = list(support)
    s = len(support)
    design = np.zeros((m + s, s + 1))
    design[:m, :s] = np.sqrt(gamma) * X[:, support]
    design[:m, s] = np.sqrt(gamma)
    design[m:, :s] = np.eye(s)
    target = np.concatenate([np.sqrt(gamma) * np.asarray(y, dtype=float), np.zeros(s)])
    theta, *_ = np.linalg.lstsq(design, target, rcond=None)
    w = np.zeros(p)
    w[support] = theta[:s]
    return w, float(theta[s])


def objective(w, b, X, y, gamma):
    r = 1.0 - y * (X @ w + b)
    return 0.5 * w @ w + 0.5 * gamma * r @ r


def gradient_minimize(X, y, support, gamma, tol=1e-10):
    """Minimize the restricted objective with a gradient method (CG)."""
    support = list(support)
    p = X.shape[1]

    def f(theta):
        w = np.zeros(p)
        w[support] = theta[:-1]
        return objective(w, theta[-1], X, y, gamma)

    def g(theta):
        w = np.zeros(p)
        w[support] = theta[:-1]
        r = y - X @ w - theta[-1]
        grad_w = theta[:-1] - gamma * X[:, support].T @ r
        return np.append(grad_w, -gamma * r.sum())

    res = minimize(f, np.zeros(len(support) + 1), jac=g, method="CG",
                   options={"gtol": tol, "maxiter": 100000})
    w = np.zeros(p)
    w[support] = res.x[:-1]
    return w, float(res.x[-1])


def naive_cv(X, y, fold_of_sample, support, gamma, loss):
    """Straight-line CV criterion: loop over folds, train by lstsq, sum losses."""
    total = 0.0
    for k in sorted(set(fold_of_sample.tolist())):
        tr = [i for i in range(len(y)) if fold_of_sample[i] != k]
        va = [i for i in range(len(y)) if fold_of_sample[i] == k]
        w, b = lstsq_train(X[tr], y[tr], support, gamma)
        for i in va:
            margin = y[i] * (sum(X[i, j] * w[j] for j in support) + b)
            if loss == "hinge":
                total += max(0.0, 1.0 - margin)
            else:
                total += (1.0 - margin) ** 2
    return total


def brute_force_search(X, y, fold_of_sample, gamma, loss, rtol=1e-10, card=None):
    """Every mask, naive criterion, tie rule: fewer features, then smallest bit string."""
    p = X.shape[1]
    scored = []
    for bits in itertools.product((0, 1), repeat=p):
        support = [j for j in range(p) if bits[j]]
        if card is not None and not card[0] <= len(support) <= card[1]:
            continue
        scored.append((naive_cv(X, y, fold_of_sample, support, gamma, loss), bits))
    best = min(v for v, _ in scored)
    tied = [(v, bits) for v, bits in scored if v <= best + rtol * max(1.0, abs(best))]
    v, bits = min(tied, key=lambda t: (sum(t[1]), "".join(map(str, t[1]))))
    return "".join(map(str, bits)), v


def pairwise_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l != 1]
    credit = 0.0
    for a in pos:
        for c in neg:
            credit += 1.0 if a > c else 0.5 if a == c else 0.0
    return credit / (len(pos) * len(neg))


def set_recovery(z_hat, z_star):
    sel = {j for j, v in enumerate(z_hat) if v}
    true = {j for j, v in enumerate(z_star) if v}
    hits = len(sel & true)
    precision = hits / len(sel) if sel else 0.0
    recall = hits / len(true) if true else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1, len(sel)


def random_instance(rng, n, p, noise=1.0):
    X = rng.standard_normal((n, p))
    w = rng.standard_normal(p)
    y = np.where(X @ w + noise * rng.standard_normal(n) >= 0, 1.0, -1.0)
    return X, y
