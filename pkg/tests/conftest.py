import numpy as np

from rcreadout.qsim import (
    HomodyneTrajectory,
    MeasurementDataset,
    QuantumSystemSpec,
    default_spec,
)
from rcreadout.seeds import DOMAIN_TRAIN_DATA


def make_synth_dataset(
    m_per_class: int = 3,
    n_samples: int = 60,
    dt_record: float = 1e-2,
    noise: float = 1.0,
    seed: int = 0,
    spec: QuantumSystemSpec | None = None,
) -> MeasurementDataset:
    """Class-separable fake homodyne records for filter/reservoir tests.

    Class z gets mean level (z - 1.5) with white noise of the right scale;
    no quantum simulation involved, so it is fast and fully controlled.
    """
    spec = spec or default_spec()
    rng = np.random.default_rng(seed)
    trajs = []
    n_traj = 4 * m_per_class
    for q in range(n_traj):
        z = q % 4
        j = (z - 1.5) + noise * rng.standard_normal(n_samples) / np.sqrt(dt_record)
        trajs.append(
            HomodyneTrajectory(
                label=z,
                dt_record=dt_record,
                j_record=j,
                seed=1000 + q,
                truncation_leak=0.0,
                x_conditional=None,
            )
        )
    return MeasurementDataset(
        spec=spec,
        trajectories=trajs,
        master_seed=seed,
        tau_m=n_samples * dt_record,
        dt_int=1e-3,
        dt_record=dt_record,
        seed_domain=DOMAIN_TRAIN_DATA,
    )
