"""DataLad extension for perturb-ability scoring of flow-based NIDS features"""

__docformat__ = "restructuredtext"

import logging

lgr = logging.getLogger("datalad.perturb")

# Defines a datalad command suite.
# This variable must be bound as a setuptools entrypoint
# to be found by datalad
command_suite = (
    # description of the command suite, displayed in cmdline help
    "Perturb-ability scoring and PS-guided defenses for flow-based NIDS",
    [
        (
            # importable module that contains the command implementation
            "datalad_perturb.score",
            # name of the command class implementation in above module
            "Score",
            # optional name of the command in the cmdline API
            "perturb-score",
            # optional name of the command in the Python API
            "perturb_score",
        ),
        ("datalad_perturb.defend", "Defend", "perturb-defend", "perturb_defend"),
        (
            "datalad_perturb.experiment",
            "Experiment",
            "perturb-experiment",
            "perturb_experiment",
        ),
        ("datalad_perturb.synth", "Synth", "perturb-synth", "perturb_synth"),
    ],
)

__version__ = "0.1.0"
