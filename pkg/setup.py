# coding=utf-8

"""
MIT License

Copyright (c) 2019 Tiny Bees

Permission is hereby granted, free of charge, to any person obtaining a copy
of this software and associated documentation files (the "Software"), to deal
in the Software without restriction, including without limitation the rights
to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
copies of the Software, and to permit persons to whom the Software is
furnished to do so, subject to the following conditions:

The above copyright notice and this permission notice shall be included in all
copies or substantial portions of the Software.

THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
SOFTWARE.

"""
import re

from setuptools import setup

# 读取版本号时不导入包, 避免安装前就需要numpy等依赖
with open('gptcm/__init__.py', encoding='utf8') as f:
    __version__ = re.search(r'__version__ = "(.+)"', f.read()).group(1)

setup(name='gptcm',
      version=__version__,
      description='贝叶斯广义promotion time治愈模型: 模拟、MCMC拟合、变量选择和评价',
      long_description=open('README.md', encoding='utf8').read(),
      long_description_content_type='text/markdown',
      author='TinyBees',
      author_email='a598824322@qq.com',
      url='https://github.com/tinybees/gptcm',
      packages=['gptcm', 'gptcm.tinylibs'],
      entry_points={'console_scripts': ['gptcm=gptcm.cli:main']},
      requires=['aelog', 'ujson', 'marshmallow', 'PyYAML', 'numpy', 'scipy', 'pandas'],
      install_requires=['aelog>=1.0.3',
                        'ujson',
                        'marshmallow>=3.13',
                        'PyYAML>=3.13',
                        'numpy>=1.20',
                        'scipy>=1.7',
                        'pandas>=1.5',
                        'arviz>=0.12',
                        'lifelines>=0.27',
                        'scikit-survival>=0.21'],
      extras_require={'test': ['pytest>=6.0']},
      python_requires=">=3.8",
      keywords="survival, cure model, bayesian, mcmc, variable selection, markov random field",
      license='MIT',
      classifiers=[
          'Development Status :: 4 - Beta',
          'Intended Audience :: Science/Research',
          'License :: OSI Approved :: MIT License',
          'Natural Language :: Chinese (Simplified)',
          'Operating System :: POSIX :: Linux',
          'Operating System :: Microsoft :: Windows',
          'Operating System :: MacOS :: MacOS X',
          'Topic :: Scientific/Engineering :: Mathematics',
          'Programming Language :: Python',
          'Programming Language :: Python :: 3.8',
          'Programming Language :: Python :: 3.9',
          'Programming Language :: Python :: 3.10']
      )
