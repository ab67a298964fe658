"""
Подкоманды командной строки.

Импорты в этом файле обеспечивают авто-регистрацию подкоманд в CommandFactory.
"""

from app.services.commands.simulate import simulate_command  # noqa
from app.services.commands.train import train_command  # noqa
from app.services.commands.test import test_command  # noqa
from app.services.commands.baseline import baseline_command  # noqa
from app.services.commands.evaluate import evaluate_command  # noqa
from app.services.commands.dump_plots import dump_plots_command  # noqa
