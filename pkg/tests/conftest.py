import pytest

from semimatch import build_instance, generate_instance, normalize_weights


@pytest.fixture
def chain():
    """3 clients / 2 servers: c0-s3, c1-s3, c1-s4, c2-s4."""
    return build_instance([0, 1, 2], [3, 4], [(0, 3), (1, 3), (1, 4), (2, 4)])


@pytest.fixture
def star4():
    return generate_instance("star", n_clients=4)


def random_unit(seed, nc=8, ns=4, p=0.5):
    return generate_instance("random-bipartite", seed=seed, n_clients=nc, n_servers=ns, p=p)


def random_weighted(seed, nc=8, ns=4, p=0.5, max_weight=8, normalized=True):
    inst = generate_instance(
        "weighted-random", seed=seed, n_clients=nc, n_servers=ns, p=p, max_weight=max_weight
    )
    return normalize_weights(inst) if normalized else inst
