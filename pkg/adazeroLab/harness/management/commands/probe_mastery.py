import json

import numpy as np
from django.core.management.base import BaseCommand

from envs.grids import BUILTIN_GRIDS, make_env
from exploration import evaluator
from exploration.probe import probe_mastery
from nncore.optim import AdamSettings

from ..errors import command_errors


class Command(BaseCommand):
    help = "Jointly train a fresh autoencoder and evaluator on a frozen set of states and report mastery."

    def add_arguments(self, parser):
        parser.add_argument('--grid', choices=sorted(BUILTIN_GRIDS), default='four_rooms')
        parser.add_argument('--states', type=int, default=10)
        parser.add_argument('--steps', type=int, default=1500)
        parser.add_argument('--lr', type=float, default=5e-3, help="autoencoder step size")
        parser.add_argument('--ev-lr', type=float, help="evaluator step size (default from settings)")
        parser.add_argument('--ev-half-life', type=float, help="evaluator step-size half-life in steps; 0 keeps it constant")
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        with command_errors():
            env = make_env(BUILTIN_GRIDS[options['grid']]())
            rng = np.random.default_rng(options['seed'])
            free = [(r, c) for r in range(env.spec.height) for c in range(env.spec.width) if env.spec.is_free((r, c))]
            order = rng.permutation(len(free))
            n = options['states']
            seen = np.stack([env.observation_at(free[i]) for i in order[:n]])
            unseen = np.stack([env.observation_at(free[i]) for i in order[n:2 * n]])
            ae_adam = AdamSettings.defaults(lr=options['lr'])
            ev_adam = evaluator.default_adam(lr=options['ev_lr'], half_life=options['ev_half_life'])
            probe = probe_mastery(seen, options['steps'], rng, unseen_states=unseen, ae_adam=ae_adam, ev_adam=ev_adam)
        self.stdout.write(json.dumps(probe.as_dict(), indent=2))
