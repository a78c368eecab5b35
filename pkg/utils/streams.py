# utils/streams.py

# External Imports
import numpy as np

# Stream roles, kept in the spawn key so that no two consumers share a stream
ROLE_FILTER = 0
ROLE_TRAJECTORY = 1
ROLE_PROXY = 2
ROLE_CENTRALIZED = 3


def stream(seed, run_id, role, index=0):
    """
    Build the random stream owned by one consumer of one Monte Carlo run.

    Args:
        seed (int): 64-bit experiment seed.
        run_id (int): Monte Carlo run index.
        role (int): One of the ROLE_* constants.
        index (int): PE index within the role (0 for single-stream roles).

    Returns:
        numpy.random.Generator: An independent PCG64 generator.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_id), int(role), int(index)))
    return np.random.Generator(np.random.PCG64(sequence))


def pe_streams(seed, run_id, m_pes, role=ROLE_FILTER):
    """One stream per processing element, independent of worker scheduling."""
    return [stream(seed, run_id, role, pe) for pe in range(m_pes)]


def trajectory_stream(seed, run_id):
    return stream(seed, run_id, ROLE_TRAJECTORY)
