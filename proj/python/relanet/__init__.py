"""Python surface for the label-graph slot/intent pipeline.

Thin dict-friendly wrappers around the C++ extension module. Structured
values cross the boundary as JSON strings; this package hides that.
"""

import json

import _relanet as _c

ConfigError = _c.ConfigError
DataError = _c.DataError
ComputeError = _c.ComputeError

Sample = _c.Sample
Dataset = _c.Dataset
LabelInventory = _c.LabelInventory
Vocabulary = _c.Vocabulary
CooccurrenceStats = _c.CooccurrenceStats
LabelGraph = _c.LabelGraph
Model = _c.Model

parse_corpus = _c.parse_corpus
serialize_corpus = _c.serialize_corpus
build_inventory = _c.build_inventory
build_vocabulary = _c.build_vocabulary
compute_stats = _c.compute_stats
build_hlg = _c.build_hlg
conditional_probability = _c.conditional_probability


def default_config(**overrides):
    """Paper-default model configuration as a dict, with overrides applied."""
    cfg = json.loads(_c.default_config_json())
    unknown = set(overrides) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg.update(overrides)
    return cfg


def variants():
    """Names of the supported ablation variants."""
    return list(_c.variants())


def make_model(config, inventory, vocabulary, graph, seed=1):
    return _c.Model(json.dumps(config), inventory, vocabulary, graph, seed)


def import_graph(doc):
    return _c.import_graph(doc if isinstance(doc, str) else json.dumps(doc))


def graph_to_dict(graph):
    return json.loads(graph.to_json())


def train(model, train_data, dev_data=None, seed=1, **options):
    if dev_data is None:
        dev_data = train_data
    return json.loads(_c.train(model, train_data, dev_data, json.dumps(options), seed))


def evaluate(model, data):
    return json.loads(_c.evaluate(model, data))


def run_ablation(variant, train_data, dev_data, test_data, config, seed=1, **options):
    return json.loads(
        _c.run_ablation(
            variant, train_data, dev_data, test_data, json.dumps(config), json.dumps(options), seed
        )
    )


def save_checkpoint(model):
    return json.loads(model.to_checkpoint_json())


def load_checkpoint(doc, graph):
    return _c.from_checkpoint_json(doc if isinstance(doc, str) else json.dumps(doc), graph)


def export_cooccurrence(stats):
    return json.loads(_c.export_cooccurrence(stats))


def export_label_correlation(model):
    return json.loads(_c.export_label_correlation(model))


def export_hidden_states(model, data, top_k=24, o_cap=500, seed=1):
    return json.loads(_c.export_hidden_states(model, data, top_k, o_cap, seed))
