"""Entry point: run one shim process per endpoint kind."""

from __future__ import annotations

from pathlib import Path

import click

from .config import SERVED_ENDPOINTS, ShimConfig
from .server import serve


@click.group()
def main() -> None:
    """Model-service shims for the motion-annotation pipeline."""


@main.command("serve")
@click.argument("endpoint_kind", type=click.Choice(sorted(SERVED_ENDPOINTS)))
@click.option("--model", default=None,
              help="Model identifier/weights path (llm kinds: '<base_url>::<model>'). "
                   "Omit for deterministic stub mode.")
@click.option("--stub-script", type=click.Path(exists=True, path_type=Path), default=None,
              help="Mock script for stub mode; defaults to the bundled stub script.")
@click.option("--device", default="cpu", show_default=True)
@click.option("--batch-size", type=int, default=1, show_default=True)
@click.option("--token", default=None, help="Require this bearer token on every request.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve_cmd(endpoint_kind, model, stub_script, device, batch_size, token, host, port):
    """Serve one endpoint kind over the wire protocol."""
    config = ShimConfig(
        endpoint_kind=endpoint_kind,
        model=model,
        device=device,
        batch_size=batch_size,
        stub_script_path=stub_script,
        bearer_token=token,
    )
    mode = "stub" if config.stub_mode else f"model={model}"
    click.echo(f"serving {endpoint_kind} ({mode}) on {host}:{port}")
    serve(config, host=host, port=port)


if __name__ == "__main__":
    main()
