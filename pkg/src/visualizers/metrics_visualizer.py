from utilities.metrics_io import read_metrics_csv
import matplotlib.pyplot as plt
import seaborn as sns
import os

class MetricsVisualizer:
    '''
    Error curves of one training run: test error per test-pooling mode and,
    when present, the training error per mode.
    '''

    def __init__(self, csv_path: str):
        self.csv_path = csv_path
        self.records = read_metrics_csv(csv_path)

        self.mode_colors = {
            'max': 'tab:blue',
            'scaled_max': 'tab:orange',
            'prob_weighted': 'tab:green',
            'stochastic_weighted': 'tab:red'
        }

    def plot_error_curves(self, output_dir: str) -> str:
        epochs = [record.epoch for record in self.records]
        modes = list(self.records[0].test_errors) if self.records else []
        train_modes = list(self.records[0].train_errors) if self.records else []
        sns.set_style('whitegrid')
        columns = 2 if train_modes else 1
        fig, axes = plt.subplots(1, columns, figsize=(7 * columns, 6), squeeze=False)

        ax = axes[0][0]
        for mode in modes:
            errors = [100.0 * record.test_errors[mode] for record in self.records]
            ax.plot(epochs, errors, label=mode, color=self.mode_colors.get(mode))
        ax.set_xlabel('Epoch')
        ax.set_ylabel('Test error (%)')
        ax.set_title('Test error per pooling method')
        ax.legend()

        if train_modes:
            ax = axes[0][1]
            for mode in train_modes:
                errors = [100.0 * record.train_errors[mode] for record in self.records]
                ax.plot(epochs, errors, label=mode, color=self.mode_colors.get(mode))
            ax.set_xlabel('Epoch')
            ax.set_ylabel('Training error (%)')
            ax.set_title('Training error per pooling method')
            ax.legend()

        plt.tight_layout()
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, 'error_curves.png')
        plt.savefig(path, dpi=150)
        plt.close(fig)
        return path
