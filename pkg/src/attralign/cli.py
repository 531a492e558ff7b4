"""Command-line pipeline: synth, hardsplit, partition, train, infer, ensemble,
eval and explain, all driven by one JSON run config and composable through
plain-text artifacts in the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

CHANNEL_KINDS = ("name", "literal", "digital", "structure")


def _error_module(exc: BaseException) -> str:
    """Deepest package module on the traceback, for machine-parsable errors."""
    module = "cli"
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("attralign."):
            module = name.split(".", 1)[1]
        tb = tb.tb_next
    return module


def load_run_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    cfg.setdefault("seed", 0)
    cfg.setdefault("dim", 128)
    cfg.setdefault("eval_ns", [1, 10])
    cfg.setdefault("ensemble", "avg")
    cfg.setdefault("candidates", "test")
    cfg.setdefault("direction", "left-to-right")
    cfg.setdefault("out_dir", "out")
    cfg["_config_dir"] = str(Path(path).resolve().parent)
    return cfg


def _resolve(cfg, path) -> str:
    p = Path(path)
    return str(p if p.is_absolute() else Path(cfg["_config_dir"]) / p)


def _out_dir(cfg, override=None) -> Path:
    out = Path(override) if override else Path(_resolve(cfg, cfg["out_dir"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _name_source(cfg):
    from .partition import NameSource
    ns = cfg.get("name_source", {"name_from_label": True})
    if ns.get("name_attributes"):
        return NameSource(from_label=False, attributes=tuple(ns["name_attributes"]))
    return NameSource()


def _load_kgs(cfg):
    from .kg import load_kg
    kg1 = load_kg(_resolve(cfg, cfg["kg1"]["relations"]), _resolve(cfg, cfg["kg1"]["attributes"]))
    kg2 = load_kg(_resolve(cfg, cfg["kg2"]["relations"]), _resolve(cfg, cfg["kg2"]["attributes"]))
    return kg1, kg2


def _load_split(cfg, out, kg1, kg2):
    from .errors import ConfigError
    from .kg import load_alignment
    if "split" in cfg:
        paths = {part: _resolve(cfg, cfg["split"][part]) for part in ("train", "valid", "test")}
    else:
        split_dir = out / "split"
        paths = {part: str(split_dir / f"{part}.tsv") for part in ("train", "valid", "test")}
    for part, path in paths.items():
        if not Path(path).exists():
            raise ConfigError(f"missing {part} alignment file {path}; "
                              f"run the hardsplit command or set the split paths")
    return tuple(load_alignment(paths[part], kg1, kg2) for part in ("train", "valid", "test"))


def _featurizer_cfg(cfg):
    feat = cfg.get("featurizer", {})
    if "embeddings" in feat and "ngram_dim" in feat:
        from .errors import ConfigError
        raise ConfigError("featurizer must set either ngram_dim or embeddings, not both")
    return feat


def _file_table(cfg):
    from .featurize import load_embeddings
    feat = _featurizer_cfg(cfg)
    if "embeddings" in feat:
        return load_embeddings(_resolve(cfg, feat["embeddings"]))
    return None


def _feature_dim(cfg):
    feat = _featurizer_cfg(cfg)
    table = _file_table(cfg)
    if table is not None:
        return table.dim
    return int(feat.get("ngram_dim", cfg["dim"]))


def _value_features(cfg, sub):
    """Frozen features for the value ids used by an encoder subgraph."""
    from .featurize import ngram_table, project_table
    used = sorted({v for _, _, v in sub.attribute_triples})
    strings = {v: sub.value_labels[v] for v in used}
    table = _file_table(cfg)
    if table is not None:
        return project_table(table, strings)
    return ngram_table(strings, _feature_dim(cfg))


def _entity_init(cfg, kind, part, side_tag):
    """Name channel: featurized names; other channels: label-keyed random."""
    import numpy as np
    from .featurize import (FeatureTable, keyed_random_table, mix_seed,
                            ngram_feature, project_table)
    from .partition import entity_names
    kg = part.structure.base
    dim = _feature_dim(cfg)
    if kind != "name":
        labels = {e: kg.entity_labels[e] for e in kg.entities}
        table = keyed_random_table(labels, dim, mix_seed(cfg["seed"], f"{kind}:{side_tag}"))
        if kind in ("literal", "digital"):
            # start encoder-channel entity states near zero so the frozen value
            # evidence, not init noise, dominates the early embeddings
            scale = float(cfg.get("encoder_init_scale", 0.05))
            for key in table.vectors:
                table.vectors[key] = table.vectors[key] * scale
        return table
    names = entity_names(part.name)
    table = _file_table(cfg)
    if table is not None:
        return project_table(table, {e: names[e] for e in kg.entities if e in names})
    vectors = {e: ngram_feature(names[e], dim) if e in names else np.zeros(dim)
               for e in kg.entities}
    return FeatureTable(dim=dim, vectors=vectors, source="ngram")


def _build_model(cfg, kind, part1, part2):
    from .channels import build_channel_model, channel_config
    from .featurize import mix_seed
    dim = _feature_dim(cfg)
    ccfg = channel_config(kind, dim=dim, max_attr_triples=int(cfg.get("max_attr_triples", 20)))
    sub1, sub2 = part1.by_kind(kind), part2.by_kind(kind)
    ent1 = _entity_init(cfg, kind, part1, "ent1")
    ent2 = _entity_init(cfg, kind, part2, "ent2")
    value_dim = dim if ccfg.use_encoder else None
    return build_channel_model(ccfg, sub1, sub2, ent1, ent2, value_dim=value_dim,
                               seed=mix_seed(cfg["seed"], f"init:{kind}"))


def _train_config_for(cfg, kind):
    from .featurize import mix_seed
    from .training import TrainConfig
    base = dict(cfg.get("train", {}))
    override = base.pop(kind, {})
    for other in CHANNEL_KINDS:
        base.pop(other, None)
    base.update(override)
    base.setdefault("seed", mix_seed(cfg["seed"], f"train:{kind}"))
    rounds = int(base.pop("rounds", 1))
    grids = {}
    for key in ("learning_rate", "l2"):
        if isinstance(base.get(key), (list, tuple)):
            grids[key] = [float(x) for x in base.pop(key)]
    return TrainConfig.from_dict(base), grids, rounds


def _channel_files(out, kind):
    return (out / f"channel_{kind}.params", out / f"channel_{kind}.json",
            out / f"loss_{kind}.csv")


def _hits1_on_pairs(model, cfg, pairs, value_features):
    """Hits@1 over `pairs`, ranking within the pairs' own entity sets."""
    from .channels import run_channel
    from .ensemble import similarity_matrix
    from .evaluation import evaluate
    sub1, sub2 = model.subgraphs
    emb1 = run_channel(model, sub1, value_features[0])
    emb2 = run_channel(model, sub2, value_features[1])
    sim = similarity_matrix(emb1, emb2, pairs.left, pairs.right)
    return evaluate(sim, pairs, ns=(1,)).hits[1]


def cmd_synth(cfg, args):
    from .featurize import mix_seed
    from .synth import SynthConfig, write_synth
    out = _out_dir(cfg, args.out) / "data"
    synth_cfg = dict(cfg.get("synth", {}))
    synth_cfg.setdefault("seed", mix_seed(cfg["seed"], "synth"))
    paths = write_synth(SynthConfig.from_dict(synth_cfg), out)
    print(json.dumps(paths, indent=2, sort_keys=True))


def cmd_hardsplit(cfg, args):
    from .featurize import mix_seed
    from .hardsplit import DEFAULT_RATIOS, build_hard_split, name_scores, write_split
    from .kg import load_alignment
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    gold = load_alignment(_resolve(cfg, cfg["gold"]), kg1, kg2)
    table = _file_table(cfg)
    featurizer = None
    if table is not None:
        featurizer = lambda text: table.get(text)
    scores = name_scores(kg1, kg2, gold, name_featurizer=featurizer,
                         name_source=_name_source(cfg), dim=_feature_dim(cfg))
    ratios = tuple(cfg.get("split_ratios", DEFAULT_RATIOS))
    split = build_hard_split(gold, scores, ratios=ratios,
                             seed=mix_seed(cfg["seed"], "hardsplit"))
    paths = write_split(split, out / "split", kg1, kg2)
    print(json.dumps(paths, indent=2, sort_keys=True))


def cmd_partition(cfg, args):
    from .partition import partition
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    ns = _name_source(cfg)
    manifest = {}
    for tag, kg in (("kg1", kg1), ("kg2", kg2)):
        parts = partition(kg, ns)
        manifest[tag] = {
            "entities": kg.n_entities,
            "relation_triples": len(kg.relation_triples),
            "attribute_triples": {sub.kind: len(sub.attribute_triples) for sub in parts},
        }
    path = out / "partition_manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(manifest, indent=2, sort_keys=True))


def _requested_kinds(args):
    from .errors import ConfigError
    if args.channel is None:
        return CHANNEL_KINDS
    if args.channel not in CHANNEL_KINDS:
        raise ConfigError(f"unknown channel {args.channel!r}")
    return (args.channel,)


def _train_rounds(model, train_pairs, tcfg, rounds, vf):
    """Split the epoch budget over several optimizer runs.

    Each round is one `train_channel` call with fresh Adagrad state; the
    restarts produce large early steps that can kick a converged margin
    configuration into a better one before settling again.
    """
    from .training import train_channel
    rounds = max(1, rounds)
    per_round, extra = divmod(tcfg.epochs, rounds)
    history = []
    for r in range(rounds):
        epochs = per_round + (1 if r < extra else 0)
        if epochs == 0:
            continue
        round_cfg = type(tcfg).from_dict({**tcfg.to_dict(), "epochs": epochs})
        history.extend(train_channel(model, train_pairs, round_cfg, value_features=vf))
    return history


def cmd_train(cfg, args):
    from .partition import partition
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    train_pairs, valid_pairs, _ = _load_split(cfg, out, kg1, kg2)
    ns = _name_source(cfg)
    part1, part2 = partition(kg1, ns), partition(kg2, ns)

    for kind in _requested_kinds(args):
        tcfg, grids, rounds = _train_config_for(cfg, kind)
        use_encoder = kind in ("literal", "digital")
        vf = ((_value_features(cfg, part1.by_kind(kind)),
               _value_features(cfg, part2.by_kind(kind))) if use_encoder else (None, None))

        combos = [{}]
        if grids:
            combos = [{"learning_rate": lr} for lr in grids.get("learning_rate", [tcfg.learning_rate])]
            combos = [dict(c, l2=l2) for c in combos for l2 in grids.get("l2", [tcfg.l2])]
        best = None
        for combo in combos:
            candidate_cfg = tcfg if not combo else type(tcfg).from_dict({**tcfg.to_dict(), **combo})
            model = _build_model(cfg, kind, part1, part2)
            history = _train_rounds(model, train_pairs, candidate_cfg, rounds, vf)
            if len(combos) == 1:
                best = (None, model, history, candidate_cfg)
                break
            if len(valid_pairs) == 0:
                from .errors import ConfigError
                raise ConfigError("grid search needs a non-empty valid split")
            score = _hits1_on_pairs(model, cfg, valid_pairs, vf)
            if best is None or score > best[0]:
                best = (score, model, history, candidate_cfg)

        _, model, history, used_cfg = best
        params_path, sidecar_path, loss_path = _channel_files(out, kind)
        model.params.save(params_path)
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump({"channel": model.config.to_dict(), "train": used_cfg.to_dict()},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(loss_path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for i, value in enumerate(history, start=1):
                fh.write(f"{i},{value!r}\n")
        print(f"trained {kind}: final loss {history[-1]:.4f} -> {params_path}")


def _restore_model(cfg, kind, part1, part2, out):
    from .errors import ConfigError
    params_path, sidecar_path, _ = _channel_files(out, kind)
    if not params_path.exists():
        raise ConfigError(f"missing checkpoint {params_path}; train the {kind} channel first")
    model = _build_model(cfg, kind, part1, part2)
    model.load_params(params_path)
    return model


def _candidates(cfg, split, kg1, kg2):
    train_pairs, valid_pairs, test_pairs = split
    if cfg["candidates"] == "all":
        return tuple(kg1.entities), tuple(kg2.entities)
    return test_pairs.left, test_pairs.right


def cmd_infer(cfg, args):
    from .channels import run_channel
    from .ensemble import save_similarity, similarity_matrix
    from .partition import partition
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    split = _load_split(cfg, out, kg1, kg2)
    ns = _name_source(cfg)
    part1, part2 = partition(kg1, ns), partition(kg2, ns)
    rows, cols = _candidates(cfg, split, kg1, kg2)
    train_pairs, valid_pairs, _ = split
    fit_rows = tuple(train_pairs.left) + tuple(valid_pairs.left)
    fit_cols = tuple(train_pairs.right) + tuple(valid_pairs.right)

    for kind in _requested_kinds(args):
        model = _restore_model(cfg, kind, part1, part2, out)
        use_encoder = kind in ("literal", "digital")
        vf1 = _value_features(cfg, part1.by_kind(kind)) if use_encoder else None
        vf2 = _value_features(cfg, part2.by_kind(kind)) if use_encoder else None
        emb1 = run_channel(model, part1.by_kind(kind), vf1)
        emb2 = run_channel(model, part2.by_kind(kind), vf2)
        sim = similarity_matrix(emb1, emb2, rows, cols)
        save_similarity(out / f"sim_{kind}.txt", sim)
        if cfg["ensemble"] == "svm":
            fit = similarity_matrix(emb1, emb2, fit_rows, fit_cols)
            save_similarity(out / f"sim_fit_{kind}.txt", fit)
        print(f"wrote sim_{kind}.txt over {len(rows)}x{len(cols)} candidates")


def cmd_ensemble(cfg, args):
    from .ensemble import (SVM_C_GRID, average_pool, build_svm_samples, combine,
                           load_similarity, save_similarity, standardize, train_svm)
    from .errors import ConfigError
    from .evaluation import evaluate
    from .featurize import mix_seed
    from .kg import AlignmentSet
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    mats = []
    for kind in CHANNEL_KINDS:
        path = out / f"sim_{kind}.txt"
        if not path.exists():
            raise ConfigError(f"missing {path}; run the infer command first")
        mats.append(load_similarity(path))

    if cfg["ensemble"] == "avg":
        combined = average_pool([standardize(m) for m in mats])
    elif cfg["ensemble"] == "svm":
        train_pairs, valid_pairs, _ = _load_split(cfg, out, kg1, kg2)
        fit_mats = [load_similarity(out / f"sim_fit_{kind}.txt") for kind in CHANNEL_KINDS]
        samples, labels = build_svm_samples(
            fit_mats, train_pairs,
            negatives_per_positive=int(cfg.get("svm_negatives", 16)),
            seed=mix_seed(cfg["seed"], "svm"))
        c_grid = cfg.get("svm_c", list(SVM_C_GRID))
        c_grid = c_grid if isinstance(c_grid, (list, tuple)) else [c_grid]
        best = None
        for c in c_grid:
            weights = train_svm(samples, labels, float(c))
            if len(c_grid) == 1:
                best = (None, weights)
                break
            if len(valid_pairs) == 0:
                raise ConfigError("choosing C by grid search needs a non-empty valid split")
            score = evaluate(combine(fit_mats, weights), valid_pairs, ns=(1,)).hits[1]
            if best is None or score > best[0]:
                best = (score, weights)
        weights = best[1]
        with open(out / "ensemble_weights.json", "w", encoding="utf-8") as fh:
            json.dump(weights.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        combined = combine(mats, weights)
    else:
        raise ConfigError(f"ensemble mode must be avg or svm, got {cfg['ensemble']!r}")

    save_similarity(out / "sim_ensemble.txt", combined)
    print(f"wrote sim_ensemble.txt ({cfg['ensemble']} mode)")


def cmd_eval(cfg, args):
    from .ensemble import load_similarity
    from .evaluation import evaluate
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    _, _, test_pairs = _load_split(cfg, out, kg1, kg2)
    sim_path = Path(args.sim) if args.sim else out / "sim_ensemble.txt"
    sim = load_similarity(sim_path)
    report = evaluate(sim, test_pairs, ns=tuple(cfg["eval_ns"]),
                      direction=cfg["direction"])
    suffix = sim_path.stem.replace("sim_", "")
    report_path = out / f"report_{suffix}.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(report.format_table())
    print(f"report -> {report_path}")


def cmd_explain(cfg, args):
    from .channels import explain_entity
    from .errors import ConfigError
    from .partition import partition
    if args.channel not in ("literal", "digital"):
        raise ConfigError("explain needs --channel literal or --channel digital")
    kg1, kg2 = _load_kgs(cfg)
    out = _out_dir(cfg, args.out)
    ns = _name_source(cfg)
    part1, part2 = partition(kg1, ns), partition(kg2, ns)
    model = _restore_model(cfg, args.channel, part1, part2, out)
    kg = kg1 if args.kg == 1 else kg2
    part = part1 if args.kg == 1 else part2
    entity = kg.entity_id(args.entity) if not args.entity.isdigit() else int(args.entity)
    rows = explain_entity(model, part.by_kind(args.channel), entity)
    print(f"entity: {kg.entity_labels[entity]}")
    print(f"{'score':>7}  {'attribute':<24} value")
    for attr, value, weight in rows:
        print(f"{weight:7.3f}  {attr:<24} {value}")


COMMANDS = {
    "synth": cmd_synth,
    "hardsplit": cmd_hardsplit,
    "partition": cmd_partition,
    "train": cmd_train,
    "infer": cmd_infer,
    "ensemble": cmd_ensemble,
    "eval": cmd_eval,
    "explain": cmd_explain,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attr-align",
        description="align entities across two knowledge graphs via attribute-typed "
                    "subgraph channels")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--channel", default=None,
                        help="restrict train/infer/explain to one channel")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--sim", default=None, help="similarity file for eval")
    parser.add_argument("--entity", default=None, help="entity label or id for explain")
    parser.add_argument("--kg", type=int, default=1, choices=(1, 2),
                        help="which graph the explain entity belongs to")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("ATTR_ALIGN_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    try:
        cfg = load_run_config(args.config)
        COMMANDS[args.command](cfg, args)
    except Exception as exc:
        from .errors import AttrAlignError
        if isinstance(exc, (AttrAlignError, OSError, KeyError, ValueError, json.JSONDecodeError)):
            message = str(exc) if not isinstance(exc, KeyError) else f"missing config key {exc}"
            print(f"ERROR {_error_module(exc)}: {message}", file=sys.stderr)
            return 1
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
