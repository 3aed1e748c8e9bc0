"""Run configuration: every tunable of the pipeline in one dataclass.

Loss trade-off lambda_domain=1, temperature=5, ridge_alpha=0.1, gp_weight=1
and learning_rate=2e-4 are the published defaults this package ships with;
architecture widths and step counts are desk-scale choices and are expected
to be overridden per experiment via the JSON config file.
"""

import json
from dataclasses import asdict, dataclass, fields

import numpy as np


@dataclass
class ExperimentConfig:
    # loss shape
    lambda_domain: float = 1.0        # trade-off on the domain-confusion term
    temperature: float = 5.0          # tempered-softmax temperature for class prototypes
    ridge_alpha: float = 0.1          # ridge regularizer in the closed-form generator
    gp_weight: float = 1.0            # critic gradient-penalty weight
    learning_rate: float = 2e-4       # Adam step size, all networks
    domain_lr_scale: float = 25.0     # extra step-size factor so the domain head tracks the encoder
    refiner_lr_scale: float = 5.0     # extra factor for the semantic encoder
    gan_lr_scale: float = 5.0         # extra factor for generator/critic at desk scale
    loss_norm: str = "mse"            # {"mse", "frobenius"} for similarity/meta losses
    unconditional_critic: bool = False

    # architecture (not fixed by the published setup)
    d_psi: int = 12                   # common-space dimension
    encoder_hidden: int = 64
    encoder_activation: str = "relu"  # hidden activation of the data encoder
    d_refined: int = 15               # refined-semantics dimension
    refiner_hidden: int = 32
    refiner_activation: str = "identity"  # hidden activation of the semantic encoder
    gan_hidden: int = 64
    d_noise: int = 0                  # 0 means "same as d_refined"

    # schedule
    align_steps: int = 6000
    batch_size: int = 128
    refine_steps: int = 3000
    n_tasks: int = 8                  # meta tasks per refinement step
    n_support: int = 0                # 0 means auto from the seen-class count
    n_query: int = 0
    gan_steps: int = 3000             # generator updates
    n_critic: int = 5                 # critic updates per generator update
    gan_batch: int = 64
    classifier_steps: int = 1500
    classifier_batch: int = 128
    per_class_count: int = 100        # synthesized samples per unseen class

    # evaluation
    include_val_as_seen: bool = False

    seed: int = 0

    def noise_dim(self):
        return self.d_noise if self.d_noise > 0 else self.d_refined

    def task_sizes(self, n_seen):
        """Support/query sizes, defaulting to ~60%/20% of the seen classes."""
        n_su = self.n_support if self.n_support > 0 else min(
            int(np.ceil(0.6 * n_seen)), n_seen - 2
        )
        n_qu = self.n_query if self.n_query > 0 else min(
            int(np.ceil(0.2 * n_seen)), n_seen - n_su
        )
        if n_su < 1 or n_qu < 1 or n_su + n_qu > n_seen:
            raise ValueError(
                f"infeasible task sizes: support={n_su}, query={n_qu}, seen classes={n_seen}"
            )
        return n_su, n_qu

    def replace(self, **kwargs):
        doc = asdict(self)
        doc.update(kwargs)
        return ExperimentConfig(**doc)

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fp:
            json.dump(asdict(self), fp, indent=2)
            fp.write("\n")

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fp:
            doc = json.load(fp)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def make_rng(seed_or_seq):
    """PCG64 generator from a 64-bit seed or a SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed_or_seq))


def stage_rngs(seed, n):
    """n independent, order-stable generators derived from one seed."""
    return [make_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]
