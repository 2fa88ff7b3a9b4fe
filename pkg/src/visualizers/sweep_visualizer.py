import matplotlib.pyplot as plt
import seaborn as sns
import pandas as pd
import os

class SweepVisualizer:
    '''
    Final test error against the retaining probability, one line per
    test-pooling mode, with the stochastic-pooling run as a horizontal reference.
    '''

    def __init__(self, csv_path: str):
        self.csv_path = csv_path
        self.summary = pd.read_csv(csv_path)

    def plot_retain_sweep(self, output_dir: str) -> str:
        sweep = self.summary[self.summary['train_mode'] == 'max_dropout'].copy()
        reference = self.summary[self.summary['train_mode'] == 'stochastic']
        sweep['final_test_error'] = 100.0 * sweep['final_test_error']

        sns.set_style('whitegrid')
        fig, ax = plt.subplots(figsize=(9, 6))
        sns.lineplot(data=sweep, x='retain_p', y='final_test_error', hue='test_mode', marker='o', ax=ax)
        if not reference.empty:
            error = 100.0 * float(reference['final_test_error'].iloc[0])
            ax.axhline(error, color='black', linestyle='--', label=f'stochastic pooling ({error:.2f}%)')
        ax.set_xlabel('Retaining probability p')
        ax.set_ylabel('Test error (%)')
        ax.set_title('Test error against the retaining probability')
        ax.legend()
        plt.tight_layout()
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, 'retain_sweep.png')
        plt.savefig(path, dpi=150)
        plt.close(fig)
        return path
