"""Command-line entry points: synth, ingest, train, embed, serve, replay, path.

Each subcommand is a thin wrapper over the core package; `serve` hosts the
FastAPI app. A JSON config file (--config) supplies per-command defaults,
individual flags override it.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dataset as ds_mod
from . import embedding as emb_mod
from . import oracle as oracle_mod
from . import session as session_mod
from . import surrogate as sur_mod
from .errors import MixExploreError
from .service.app import build_context, create_app


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _read_config(ctx, param, value):
    if not value:
        return value
    with open(value, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    section = config.get(ctx.info_name, {})
    ctx.default_map = {**(ctx.default_map or {}), **section}
    return value


_CONFIG_OPTION = click.option(
    "--config", type=click.Path(exists=True), callback=_read_config,
    expose_value=False, is_eager=True,
    help="JSON file of per-command defaults, e.g. {\"serve\": {\"port\": 9000}}.",
)


@click.group()
def main():
    """Interactive mixture-optimization toolkit."""


def _load_dataset(data: str, schema: str) -> ds_mod.Dataset:
    schema_obj = ds_mod.ColumnSchema.from_json(schema)
    return ds_mod.load_csv(data, schema_obj)


@main.command()
@_CONFIG_OPTION
@click.option("--n", default=20000, show_default=True, help="number of rows to simulate")
@click.option("--seed", default=7, show_default=True)
@click.option("--noise-frac", default=0.01, show_default=True,
              help="noise std as a fraction of each output dimension's range")
@click.option("--out", default="synth.csv", show_default=True, type=click.Path())
@click.option("--schema-out", default=None, type=click.Path(),
              help="where to write the sidecar schema (default: <out>.schema.json)")
def synth(n, seed, noise_frac, out, schema_out):
    """Generate a synthetic dataset from the built-in analytic surfaces."""
    spec = oracle_mod.default_spec(seed)
    if noise_frac > 0:
        spec = oracle_mod.with_noise_fraction(spec, noise_frac)
    dataset = oracle_mod.generate(spec, n, seed)
    ds_mod.write_csv(dataset, out)
    schema_path = schema_out or f"{out}.schema.json"
    dataset.schema.to_json(schema_path)
    click.echo(f"wrote {len(dataset)} rows to {out} (schema: {schema_path})")
    click.echo(f"csv sha256: {ds_mod._file_sha256(Path(out))}")
    click.echo(f"dataset fingerprint: {dataset.fingerprint()}")


@main.command()
@_CONFIG_OPTION
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--schema", required=True, type=click.Path(exists=True))
def ingest(data, schema):
    """Validate a CSV dataset and write its binary cache."""
    try:
        dataset = _load_dataset(data, schema)
    except MixExploreError as exc:
        _fail(str(exc))
    click.echo(f"loaded {len(dataset)} rows from {data}")
    click.echo(f"dataset fingerprint: {dataset.fingerprint()}")


@main.command()
@_CONFIG_OPTION
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--schema", required=True, type=click.Path(exists=True))
@click.option("--out", default="model.mixgb", show_default=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--trees", default=200, show_default=True)
@click.option("--depth", default=6, show_default=True)
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--bins", default=64, show_default=True)
@click.option("--min-leaf", default=20, show_default=True)
@click.option("--subsample", default=0.8, show_default=True)
@click.option("--holdout", default=0.1, show_default=True)
@click.option("--knn-k", default=5, show_default=True)
@click.option("--gamma", default=0.5, show_default=True, help="boosted/kNN blend weight")
@click.option("--quiet-dims", is_flag=True, help="suppress the per-dimension metric lines")
def train(data, schema, out, seed, trees, depth, learning_rate, bins, min_leaf,
          subsample, holdout, knn_k, gamma, quiet_dims):
    """Fit the surrogate ensemble and report holdout metrics."""
    try:
        dataset = _load_dataset(data, schema)
        config = sur_mod.TrainConfig(
            n_trees=trees, max_depth=depth, learning_rate=learning_rate,
            histogram_bins=bins, min_samples_leaf=min_leaf, row_subsample=subsample,
            holdout_fraction=holdout, knn_k=knn_k, blend_gamma=gamma, seed=seed,
        )
        ensemble = sur_mod.train(dataset, config)
        metrics = sur_mod.evaluate(ensemble, sur_mod.holdout_view(dataset, ensemble))
    except MixExploreError as exc:
        _fail(str(exc))
    if not quiet_dims:
        for j, name in enumerate(dataset.schema.output_names):
            click.echo(f"dim {j:2d} {name:>12s}  r2={metrics['r2'][j]:+.4f}  rmse={metrics['rmse'][j]:.6g}")
    click.echo(f"holdout r2: min={metrics['r2'].min():+.4f} median={np.median(metrics['r2']):+.4f}")
    fingerprint = ensemble.save(out)
    click.echo(f"saved model to {out}")
    click.echo(f"model fingerprint: {fingerprint}")


@main.command()
@_CONFIG_OPTION
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--schema", required=True, type=click.Path(exists=True))
@click.option("--out", default="embedding.mixemb", show_default=True, type=click.Path())
@click.option("--space", default="output", show_default=True,
              type=click.Choice([emb_mod.OUTPUT_SPACE, emb_mod.INPUT_SPACE]))
@click.option("--seed", default=0, show_default=True)
@click.option("--perplexity", default=30.0, show_default=True)
@click.option("--iters", default=1000, show_default=True)
@click.option("--theta", default=0.5, show_default=True, help="Barnes-Hut accuracy, 0 = exact")
@click.option("--cap", default=50000, show_default=True, help="subsample cap before embedding")
def embed(data, schema, out, space, seed, perplexity, iters, theta, cap):
    """Compute and save a 2-D t-SNE embedding of one space of the dataset."""
    try:
        dataset = _load_dataset(data, schema)
        config = emb_mod.TsneConfig(
            perplexity=perplexity, n_iter=iters, theta=theta, seed=seed, subsample_cap=cap)
        emap = emb_mod.embed_dataset(dataset, space, config)
    except MixExploreError as exc:
        _fail(str(exc))
    fingerprint = emb_mod.save_embedding(emap, out)
    click.echo(f"embedded {len(emap)} points ({space} space) to {out}")
    click.echo(f"kl: initial={emap.kl_trace[0][1]:.6f} final={emap.kl_trace[-1][1]:.6f}")
    click.echo(f"embedding fingerprint: {fingerprint}")


def _load_context(data, schema, model, embedding_path, embedding_input=None,
                  beta=session_mod.DEFAULT_BETA, k=10, session_log_dir=None,
                  train_on_start=False, embed_on_start=False):
    import hashlib
    dataset = _load_dataset(data, schema)
    if train_on_start:
        ensemble = sur_mod.train(dataset, sur_mod.TrainConfig())
        model_fp = ensemble.save(model) if model else ensemble.fingerprint()
    else:
        ensemble = sur_mod.load(model, dataset)
        model_fp = hashlib.sha256(Path(model).read_bytes()).hexdigest()
    if embed_on_start:
        emap = emb_mod.embed_dataset(dataset, emb_mod.OUTPUT_SPACE, emb_mod.TsneConfig())
        emb_fp = emb_mod.save_embedding(emap, embedding_path) if embedding_path else ""
    else:
        emap = emb_mod.load_embedding(embedding_path)
        emb_fp = hashlib.sha256(Path(embedding_path).read_bytes()).hexdigest()
    if emap.dataset_fingerprint and emap.dataset_fingerprint != dataset.fingerprint():
        _fail("embedding was computed for a different dataset (fingerprint mismatch)")
    emap_in = emb_mod.load_embedding(embedding_input) if embedding_input else None
    return build_context(
        dataset, ensemble, emap, emap_in,
        beta=beta, default_k=k,
        model_fingerprint=model_fp, embedding_fingerprint=emb_fp,
        session_log_dir=session_log_dir,
    )


@main.command()
@_CONFIG_OPTION
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--schema", required=True, type=click.Path(exists=True))
@click.option("--model", default=None, type=click.Path(),
              help="trained model file; with --train-on-start it is written here")
@click.option("--embedding", default=None, type=click.Path(),
              help="embedding file; with --embed-on-start it is written here")
@click.option("--embedding-input", default=None, type=click.Path(exists=True))
@click.option("--train-on-start", is_flag=True, help="fit the model at startup instead of loading")
@click.option("--embed-on-start", is_flag=True, help="compute the embedding at startup")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--beta", default=session_mod.DEFAULT_BETA, show_default=True,
              help="emphasis boost for adjusted output dimensions")
@click.option("--k", default=10, show_default=True, help="default neighbor count")
@click.option("--ui", default=None, type=click.Path(), help="static directory for the web UI")
@click.option("--session-log-dir", default=None, type=click.Path(),
              help="append session histories here as replayable .jsonl logs")
def serve(data, schema, model, embedding, embedding_input, train_on_start, embed_on_start,
          host, port, beta, k, ui, session_log_dir):
    """Start the HTTP service."""
    import uvicorn
    if model is None and not train_on_start:
        _fail("either --model or --train-on-start is required")
    if embedding is None and not embed_on_start:
        _fail("either --embedding or --embed-on-start is required")
    try:
        ctx = _load_context(data, schema, model, embedding, embedding_input, beta, k,
                            session_log_dir=session_log_dir,
                            train_on_start=train_on_start, embed_on_start=embed_on_start)
    except MixExploreError as exc:
        _fail(str(exc))
    click.echo(f"dataset fingerprint:   {ctx.fingerprints.dataset}")
    click.echo(f"model fingerprint:     {ctx.fingerprints.model}")
    click.echo(f"embedding fingerprint: {ctx.fingerprints.embedding}")
    app = create_app(ctx, ui_dir=ui)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command()
@_CONFIG_OPTION
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--schema", required=True, type=click.Path(exists=True))
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--embedding", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
def replay(data, schema, model, embedding, log_path):
    """Re-run a recorded session log and print the final state."""
    try:
        ctx = _load_context(data, schema, model, embedding)
        state = session_mod.replay_log(ctx.resources, log_path)
    except MixExploreError as exc:
        _fail(str(exc))
    click.echo(json.dumps({
        "mixture": state.current_mixture.as_list(),
        "record_id": state.current_record,
        "adjustments": {str(k_): v for k_, v in sorted(state.pending_adjustments.items())},
        "revision": state.revision,
        "state_hash": state.state_hash(),
    }, indent=2))


@main.command(name="path")
@_CONFIG_OPTION
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--schema", required=True, type=click.Path(exists=True))
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--embedding", required=True, type=click.Path(exists=True))
@click.option("--from", "from_id", required=True, type=int)
@click.option("--to", "to_id", required=True, type=int)
@click.option("--steps", default=21, show_default=True)
def path_cmd(data, schema, model, embedding, from_id, to_id, steps):
    """Headless interpolation between two record ids; emits JSON."""
    from .pathfinder import trace_path
    try:
        ctx = _load_context(data, schema, model, embedding)
        x0 = ctx.dataset.record(from_id).input
        x1 = ctx.dataset.record(to_id).input
        result = trace_path(
            ctx.ensemble, ctx.resources.snap_index, ctx.resources.embedding,
            x0, x1, steps, from_id=from_id, to_id=to_id)
    except MixExploreError as exc:
        _fail(str(exc))
    click.echo(json.dumps({
        "from_id": from_id,
        "to_id": to_id,
        "steps": [
            {
                "lambda": s.lam,
                "input": s.input.as_list(),
                "predicted": [float(v) for v in s.predicted],
                "snapped_id": s.snapped_id,
                "snap_distance": s.snap_distance,
                "embed_xy": [float(v) for v in s.embed_xy],
            }
            for s in result.steps
        ],
    }))


if __name__ == "__main__":
    main()
