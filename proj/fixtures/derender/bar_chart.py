import matplotlib.pyplot as plt
import numpy as np

regions = ["North", "South", "East", "West", "Central"]
sales_2022 = [42, 35, 51, 28, 39]
sales_2023 = [47, 31, 58, 33, 44]

x = np.arange(len(regions))
colors = plt.cm.jet(np.linspace(0, 1, 2))

fig, ax = plt.subplots(figsize=(6.4, 4.8), dpi=100)
ax.bar(x - 0.2, sales_2022, width=0.4, color=colors[0], label="2022")
ax.bar(x + 0.2, sales_2023, width=0.4, color=colors[1], label="2023")
ax.set_xticks(x)
ax.set_xticklabels(regions)
ax.set_title("Regional sales")
ax.set_xlabel("Region")
ax.tick_params(labelsize=6)
ax.legend()
plt.show()
