from analyzers.model_count_analyzer import ModelCountAnalyzer
import matplotlib.pyplot as plt
import seaborn as sns
import os

class CountVisualizer:
    def __init__(self, t_max: int = 64):
        self.t_max = t_max
        self.analyzer = ModelCountAnalyzer()

    def plot_bases(self, output_dir: str) -> str:
        '''
        b(t) of max-pooling dropout and stochastic pooling for t = 1..t_max.
        '''
        table = self.analyzer.get_base_table(self.t_max)
        sns.set_style('whitegrid')
        fig, ax = plt.subplots(figsize=(9, 6))
        ax.plot(table['t'], table['b_maxpool_dropout'], marker='o', markersize=3, label='max-pooling dropout, (1+t)^(1/t)')
        ax.plot(table['t'], table['b_stochastic'], marker='s', markersize=3, label='stochastic pooling, t^(1/t)')
        peak = self.analyzer.get_stochastic_peak(self.t_max)
        ax.axvline(peak, color='gray', linestyle=':', label=f'stochastic peak at t = {peak}')
        ax.set_xlabel('Pooling region size t')
        ax.set_ylabel('Base b(t)')
        ax.set_title('Per-unit base of the number of possibly trained models')
        ax.legend()
        plt.tight_layout()
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, 'model_count_bases.png')
        plt.savefig(path, dpi=150)
        plt.close(fig)
        return path
