"""Semantic refinement: similarity alignment plus episodic meta generation.

The semantic encoder is trained so that (a) the cosine geometry of refined
class semantics matches the cosine geometry of the dark-knowledge prototypes
(similarity alignment), and (b) a closed-form ridge generator fitted on the
refined semantics of a random support subset of seen classes predicts the
feature prototypes of a disjoint query subset (meta generation). The second
loss differentiates through the ridge pseudo-inverse, so both the query-side
product and the support-side solve contribute encoder gradients.
"""

from dataclasses import dataclass

import numpy as np

from .align import encode, similarity_matrix
from .data import training_rows
from .linops import ridge_solve, ridge_solve_backward, unit_rows
from .nets import FeedForwardNet, Layer, adam_init, adam_step


@dataclass
class SemanticEncoder:
    net: FeedForwardNet
    d_refined: int

    def encode(self, semantics):
        out, _ = self.net.forward(np.asarray(semantics, dtype=self.net.dtype))
        return out


@dataclass
class MetaTask:
    support_classes: np.ndarray    # seen-class indices, disjoint from query
    query_classes: np.ndarray
    support_semantics: np.ndarray
    query_semantics: np.ndarray
    support_prototypes: np.ndarray
    query_prototypes: np.ndarray


@dataclass
class RefinementConfig:
    alpha: float = 0.1
    n_tasks: int = 8
    n_support: int = 0
    n_query: int = 0
    steps: int = 200
    learning_rate: float = 2e-4


def identity_encoder(d_sem, dtype=np.float32):
    """Untrained pass-through encoder: refined semantics equal the originals."""
    net = FeedForwardNet(
        [Layer(np.eye(d_sem), np.zeros(d_sem), "identity")], dtype=dtype
    )
    return SemanticEncoder(net=net, d_refined=d_sem)


def class_prototypes(space, bundle, manifest):
    """Per-seen-class mean of encoded training features, [n_seen, d_psi] float64."""
    rows = training_rows(bundle, manifest)
    psi = encode(space, bundle.features[rows]).astype(np.float64)
    class_ids = bundle.class_ids[rows]
    protos = np.empty((space.seen_class_ids.size, psi.shape[1]))
    for t, class_id in enumerate(space.seen_class_ids):
        mask = class_ids == class_id
        if not mask.any():
            raise ValueError(f"class with zero samples: class id {int(class_id)}")
        protos[t] = psi[mask].mean(axis=0)
    return protos


def sample_meta_task(prototypes, semantics, n_support, n_query, rng):
    """Draw disjoint support/query class subsets uniformly without replacement."""
    n_seen = prototypes.shape[0]
    if n_support < 1 or n_query < 1 or n_support + n_query > n_seen:
        raise ValueError(
            f"infeasible task sizes: support={n_support}, query={n_query}, classes={n_seen}"
        )
    perm = rng.permutation(n_seen)
    support = np.sort(perm[:n_support])
    query = np.sort(perm[n_support : n_support + n_query])
    return MetaTask(
        support_classes=support,
        query_classes=query,
        support_semantics=semantics[support],
        query_semantics=semantics[query],
        support_prototypes=prototypes[support],
        query_prototypes=prototypes[query],
    )


def _matrix_loss(diff, kind):
    """Loss and gradient for a residual matrix under the configured norm."""
    if kind == "mse":
        loss = float((diff**2).mean())
        grad = (2.0 / diff.size) * diff
    elif kind == "frobenius":
        loss = float(np.sqrt((diff**2).sum()))
        grad = diff / loss if loss > 0 else np.zeros_like(diff)
    else:
        raise ValueError(f"unknown loss norm {kind!r}")
    return loss, grad


def isa_loss(m_entries, encoder, seen_semantics, loss_norm="mse"):
    """Similarity-alignment loss and its gradient wrt the encoder parameters.

    m_entries is the (frozen) dark-knowledge cosine matrix; the refined
    cosine matrix is recomputed from the current encoder.
    """
    m_entries = np.asarray(m_entries, dtype=np.float64)
    refined, cache = encoder.net.forward(seen_semantics)
    try:
        unit, norms = unit_rows(refined.astype(np.float64))
    except ValueError as exc:
        raise ValueError(f"zero refined-semantic row (cosine undefined): {exc}") from exc
    n_matrix = unit @ unit.T
    loss, grad_n = _matrix_loss(n_matrix - m_entries, loss_norm)
    grad_unit = (grad_n + grad_n.T) @ unit
    inner = (grad_unit * unit).sum(axis=1, keepdims=True)
    grad_refined = (grad_unit - inner * unit) / norms[:, None]
    grads, _ = encoder.net.backward(cache, grad_refined.astype(encoder.net.dtype))
    return loss, grads


def umg_loss(task, encoder, alpha, loss_norm="mse", support_gradient=True):
    """Meta-generation loss of one task and its gradient wrt the encoder.

    Fits the closed-form ridge generator on refined support semantics vs
    support prototypes, predicts query prototypes from refined query
    semantics, and differentiates the residual through both the query-side
    product and the support-side solve. `support_gradient=False` drops the
    solve path (diagnostics only).
    """
    refined_su, cache_su = encoder.net.forward(task.support_semantics)
    refined_qu, cache_qu = encoder.net.forward(task.query_semantics)
    a_su = refined_su.astype(np.float64)
    a_qu = refined_qu.astype(np.float64)
    u_su = np.asarray(task.support_prototypes, dtype=np.float64)
    u_qu = np.asarray(task.query_prototypes, dtype=np.float64)

    coeffs = ridge_solve(a_su, u_su, alpha)
    if not np.isfinite(coeffs).all():
        raise ValueError("non-finite ridge solution in meta-generation loss")
    predicted = a_qu @ coeffs
    loss, grad_pred = _matrix_loss(predicted - u_qu, loss_norm)

    grad_a_qu = grad_pred @ coeffs.T
    grads, _ = encoder.net.backward(cache_qu, grad_a_qu.astype(encoder.net.dtype))
    if support_gradient:
        grad_coeffs = a_qu.T @ grad_pred
        grad_a_su = ridge_solve_backward(a_su, u_su, alpha, coeffs, grad_coeffs)
        grads_su, _ = encoder.net.backward(cache_su, grad_a_su.astype(encoder.net.dtype))
        grads = [g + gs for g, gs in zip(grads, grads_su)]
    return loss, grads


def meta_loss(tasks, encoder, alpha, loss_norm="mse"):
    """Mean task loss and mean task gradient."""
    if not tasks:
        raise ValueError("empty task list")
    total = 0.0
    grads = None
    for task in tasks:
        loss, task_grads = umg_loss(task, encoder, alpha, loss_norm=loss_norm)
        total += loss
        if grads is None:
            grads = [g.copy() for g in task_grads]
        else:
            for g, tg in zip(grads, task_grads):
                g += tg
    scale = 1.0 / len(tasks)
    return total * scale, [g * scale for g in grads]


def refine_semantics(space, dark, bundle, manifest, cfg, rng, use_isa=True, use_umg=True):
    """Train the semantic encoder; returns (encoder, trace).

    trace rows are (step, loss_similarity, loss_meta, loss_total); a
    disabled loss is recorded as 0.0. The dark-knowledge similarity matrix
    is computed once and frozen; the refined similarity matrix is recomputed
    from the current encoder every step.
    """
    seen_semantics = bundle.semantics[space.seen_class_ids].astype(np.float32)
    prototypes = class_prototypes(space, bundle, manifest)
    m_entries = similarity_matrix(dark.prototypes, source="dark_knowledge").entries
    n_seen = space.seen_class_ids.size

    # identity hidden activation by default: with per-class random semantic
    # noise, a nonlinear refiner can memorize seen classes through the noise
    # dimensions, which defeats the episodic generalization objective
    encoder = SemanticEncoder(
        net=FeedForwardNet.create(
            [bundle.d_sem, cfg.refiner_hidden, cfg.d_refined],
            [cfg.refiner_activation, "identity"], rng,
        ),
        d_refined=cfg.d_refined,
    )
    n_su, n_qu = cfg.task_sizes(n_seen) if use_umg else (0, 0)
    rc = RefinementConfig(
        alpha=cfg.ridge_alpha,
        n_tasks=cfg.n_tasks,
        n_support=n_su,
        n_query=n_qu,
        steps=cfg.refine_steps,
        learning_rate=cfg.learning_rate * cfg.refiner_lr_scale,
    )
    opt = adam_init(encoder.net.parameters(), rc.learning_rate)

    trace = []
    for step in range(rc.steps):
        grads = [np.zeros_like(p) for p in encoder.net.parameters()]
        loss_meta = 0.0
        loss_sim = 0.0
        if use_umg:
            tasks = [
                sample_meta_task(prototypes, seen_semantics, rc.n_support, rc.n_query, rng)
                for _ in range(rc.n_tasks)
            ]
            loss_meta, g_meta = meta_loss(tasks, encoder, rc.alpha, cfg.loss_norm)
            for g, gm in zip(grads, g_meta):
                g += gm
        if use_isa:
            loss_sim, g_sim = isa_loss(m_entries, encoder, seen_semantics, cfg.loss_norm)
            for g, gs in zip(grads, g_sim):
                g += gs
        total = loss_sim + loss_meta
        if not np.isfinite(total):
            raise RuntimeError(
                f"refinement diverged at step {step}: "
                f"loss_similarity={loss_sim}, loss_meta={loss_meta}"
            )
        adam_step(encoder.net.parameters(), grads, opt)
        trace.append((step, loss_sim, loss_meta, total))
    return encoder, trace


def input_jacobian(net, x):
    """Per-sample Jacobian d out / d in of an MLP, [n, n_out, n_in]."""
    from .nets import _act_prime  # elementwise activations only

    _, cache = net.forward(x)
    n = cache.x.shape[0]
    jac = np.broadcast_to(np.eye(net.n_out, dtype=np.float64), (n, net.n_out, net.n_out)).copy()
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        prime = _act_prime(layer.activation, cache.pre[k], cache.post[k]).astype(np.float64)
        jac = (jac * prime[:, None, :]) @ layer.weights.T.astype(np.float64)
    return jac


def jacobian_block_energy(encoder, inputs, n_intrinsic):
    """Mean squared Jacobian energy of the leading block vs the rest.

    Returns (intrinsic_energy, noise_energy): the mean squared sensitivity
    of the encoder output to the first n_intrinsic input dimensions and to
    the remaining ones, averaged over the given inputs.
    """
    jac = input_jacobian(encoder.net, np.asarray(inputs, dtype=encoder.net.dtype))
    intrinsic = float((jac[:, :, :n_intrinsic] ** 2).mean())
    noise = float((jac[:, :, n_intrinsic:] ** 2).mean())
    return intrinsic, noise
