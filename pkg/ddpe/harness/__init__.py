# Copyright 2024 The ddpe Contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
The Harness Module
------------------

Training with the joint objective, SGD with momentum, a cosine schedule and
stochastic weight averaging; evaluation; and the experiment runner that
repeats training over seeds, protocol targets and variants and reports mean
accuracies.
"""
from .errors import HarnessError, HarnessException, TrainingDiverged
from .optim import SGDState, cosine_lr, sgd_step, swa_update
from .train import (
    EpochRecord,
    History,
    SWAConfig,
    TrainConfig,
    evaluate,
    evaluate_by_domain,
    predict_samples,
    train,
)
from .variables import (
    all_variables,
    data_variables,
    experiment_variables,
    network_config_from,
    network_variables,
    train_config_from,
    training_variables,
)
from .report import (
    CellResult,
    RunReport,
    load_report,
    render_table,
    summary_dict,
    write_summary,
    write_summary_csv,
)
from .experiment import (
    ABLATIONS,
    Experiment,
    ExperimentProgressBar,
    Variant,
    ablation_variants,
    config_echo,
    image_geometry,
    load_samples,
    run_cell,
)
