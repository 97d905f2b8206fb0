"""Initialize an experiment directory."""

from pathlib import Path
from typing import Optional

from ..config import dump_config, preset_config
from ..orchestrator.steps import EXPERIMENT_DIRS

CONFIG_NAME = "config.yaml"


def init_experiment(target_dir: Optional[Path] = None, preset: str = "default") -> bool:
    """
    Write an experiment skeleton.

    Creates:
      - data/ ckpt/ reports/ figures/ logs/
      - config.yaml (the named preset, every key spelled out)

    Existing files are left untouched.
    """
    target = Path(target_dir) if target_dir else Path.cwd()
    config = preset_config(preset)

    created = []
    for name in EXPERIMENT_DIRS:
        directory = target / name
        if directory.exists():
            print(f"Already exists: {directory}/")
        else:
            directory.mkdir(parents=True)
            print(f"Created: {directory}/")
            created.append(directory)

    config_file = target / CONFIG_NAME
    if config_file.exists():
        print(f"Already exists: {config_file}")
    else:
        config_file.write_text(dump_config(config))
        print(f"Created: {config_file}")
        created.append(config_file)

    if created:
        print("\nNext steps:")
        print(f"  1. Edit {config_file}")
        print(f"  2. cinevae run --config {config_file} --out {target} --phases all")
    else:
        print("\nAlready initialized. No changes needed.")

    return True
