"""Location-conditioned prediction: train on seen locations, predict anywhere.

    >>> import spatialgen as sg
    >>> data = sg.synth(locations=60, samples=10, seed=1)
    >>> train_ids, test_ids = sg.split(len(data), 0.2, seed=1)
    >>> model = sg.train(data.subset(train_ids), {"epochs": 50, "k": 4})
    >>> report = sg.evaluate(model, data.subset(test_ids))
"""

from ._core import (
    Dataset,
    Error,
    Model,
    __version__,
    edge_features,
    evaluate,
    knn_graph,
    run_cli,
    split,
    synth,
    train,
)

__all__ = [
    "Dataset",
    "Error",
    "Model",
    "__version__",
    "edge_features",
    "evaluate",
    "knn_graph",
    "run_cli",
    "split",
    "synth",
    "train",
]
