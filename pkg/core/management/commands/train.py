import logging
import time
from pathlib import Path

from core.management.base import CommandResult, TrackcullCommand
from core.services.classifiers import (
    ErtHyperparams,
    ErtModel,
    MlpHyperparams,
    MlpModel,
    save_model,
    train_classifier,
)
from core.services.dataset import read_dataset

logger = logging.getLogger(__name__)

MLP_DEFAULTS = MlpHyperparams()
ERT_DEFAULTS = ErtHyperparams()


class Command(TrackcullCommand):
    help = "Train an MLP or extremely-randomized-trees candidate classifier"

    def add_command_arguments(self, parser):
        parser.add_argument("dataset", help="Training dataset CSV")
        parser.add_argument("--model", choices=[MlpModel.KIND, ErtModel.KIND], default=MlpModel.KIND)
        parser.add_argument("-o", "--output", default="model.json")

        mlp = parser.add_argument_group("MLP")
        mlp.add_argument("--hidden-layers", type=int, nargs="+", default=MLP_DEFAULTS.hidden_layers)
        mlp.add_argument("--batch-size", type=int, default=MLP_DEFAULTS.batch_size)
        mlp.add_argument("--learning-rate", type=float, default=MLP_DEFAULTS.initial_lr)
        mlp.add_argument("--max-epochs", type=int, default=MLP_DEFAULTS.max_epochs)
        mlp.add_argument("--lr-patience", type=int, default=MLP_DEFAULTS.lr_patience)
        mlp.add_argument("--lr-factor", type=float, default=MLP_DEFAULTS.lr_factor)
        mlp.add_argument("--min-lr", type=float, default=MLP_DEFAULTS.min_lr)

        ert = parser.add_argument_group("ERT")
        ert.add_argument("--estimators", type=int, default=ERT_DEFAULTS.n_estimators)
        ert.add_argument("--features-per-split", type=int, default=ERT_DEFAULTS.features_per_split)
        ert.add_argument("--min-samples-split", type=int, default=ERT_DEFAULTS.min_samples_split)
        ert.add_argument("--max-depth", type=int, default=None)

    def run(self, options: dict) -> CommandResult:
        with self.option_values():
            hyperparams = hyperparams_from_options(options)
        dataset = read_dataset(Path(options["dataset"]))
        if len(dataset) == 0:
            raise self.usage_error(f"{options['dataset']} holds no rows to train on")

        started = time.perf_counter()
        model = train_classifier(dataset, hyperparams, options["threads"])
        train_seconds = time.perf_counter() - started

        path = self.output_path(options, options["output"])
        save_model(model, path)

        self.stdout.write(f"Rows: {len(dataset)} ({dataset.n_valid} valid, {dataset.n_invalid} invalid)")
        self.stdout.write(f"Training accuracy: {model.metadata.train_accuracy * 100:.2f}%")
        if model.metadata.epochs_run is not None:
            self.stdout.write(
                f"Epochs: {model.metadata.epochs_run}, final loss {model.metadata.final_loss:.6f}"
            )
        self.stdout.write(f"Time to train: {train_seconds:.1f}s")
        self.stdout.write(self.style.SUCCESS(f"Saved {model.KIND} model to {path}"))

        return CommandResult(
            outputs={path: ()},
            summary={
                "model": model.KIND,
                "rows": len(dataset),
                "train_accuracy": model.metadata.train_accuracy,
            },
            timing={"train_seconds": train_seconds},
        )


def hyperparams_from_options(options: dict) -> MlpHyperparams | ErtHyperparams:
    if options["model"] == ErtModel.KIND:
        return ErtHyperparams(
            n_estimators=options["estimators"],
            features_per_split=options["features_per_split"],
            min_samples_split=options["min_samples_split"],
            max_depth=options["max_depth"],
            seed=options["seed"],
        )
    return MlpHyperparams(
        hidden_layers=options["hidden_layers"],
        batch_size=options["batch_size"],
        initial_lr=options["learning_rate"],
        max_epochs=options["max_epochs"],
        lr_patience=options["lr_patience"],
        lr_factor=options["lr_factor"],
        min_lr=options["min_lr"],
        seed=options["seed"],
    )
