"""Reference formulas written without the package, used as test oracles."""

import math


def phi(x):
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def exact_misid(gap, var1, var2, n1, n2):
    """P(sample mean of the best arm <= the other's) for two Gaussian arms."""
    return phi(-gap / math.sqrt(var1 / n1 + var2 / n2))


def known_best_weights(variances, a_star):
    """Closed-form allocation when arm ``a_star`` is known to be best."""
    rest = sum(v for i, v in enumerate(variances) if i != a_star)
    s = math.sqrt(variances[a_star])
    head = s / (s + math.sqrt(rest))
    return [head if i == a_star else (1.0 - head) * v / rest for i, v in enumerate(variances)]


def gna_weights(variances):
    """Minimizer of the largest pairwise cost var_i/w_i + var_j/w_j.

    If one variance dominates the sum of the others, the heavy arm plays the
    role of the known best arm; otherwise weights proportional to variances
    equalize every pair at cost 2 * sum(variances).
    """
    total = sum(variances)
    top = max(range(len(variances)), key=lambda i: variances[i])
    if variances[top] >= total - variances[top]:
        return known_best_weights(variances, top)
    return [v / total for v in variances]


def max_pair_cost(w, variances):
    K = len(w)
    return max(variances[i] / w[i] + variances[j] / w[j] for i in range(K) for j in range(i + 1, K))
